#include <stdio.h>
#include "teachkit.h"
int main(void) {
  double w[2];
  const double pts[4] = {1.5707963267948966, 0.0, 0.0, 1.0};
  const double u[2] = {9.81, 0.0};
  if (tk_ridge_fit(pts, u, 1e-6, w) != TK_OK) return 1;
  TkTrajectory *t = NULL;
  if (tk_rollout(w[0], w[1], pts[0], pts[1], 3.0, &t) != TK_OK) return 2;
  double q, v, tau;
  tk_trajectory_get(t, 0, &q, &v, &tau);
  printf("score %.1f len %zu tau0 %.5f\n", tk_teaching_score(pts[0], pts[1], pts[2], pts[3]), tk_trajectory_len(t), tau);
  tk_trajectory_free(t);
  TkStore *s = NULL; char id[33];
  tk_store_new(1, 0.1, &s);
  tk_store_create_session(s, TK_GROUP_TARGET, id, sizeof id);
  TkCommitResult r;
  int st = tk_store_commit(s, id, pts, &r);
  printf("commit %d phase %u rmse %.4f\n", st, r.phase, r.rmse);
  tk_store_free(s);
  return 0;
}

#include <math.h>
#include <stdio.h>
#include "fracdiff.h"

int main(void) {
    double re = 0.0, im = 0.0;
    if (fd_ml_eval(1.0, 1.0, 1.0, 0.0, &re, &im) != FD_STATUS_OK) return 1;
    if (fabs(re - 2.718281828459045) > 1e-14) return 2;

    const char *cfg = "[problem]\nL = pi\nM = 32\nN = 4\nalphas = 0.6\na = sin(x)\nT = 1\nK = 16\n";
    FdModel *model = NULL;
    if (fd_model_from_str(cfg, &model) != FD_STATUS_OK) return 3;
    FdSolution *sol = NULL;
    if (fd_solve(model, &sol) != FD_STATUS_OK) return 4;
    size_t k = fd_solution_times_len(sol);
    double c[4];
    if (fd_solution_coeffs(sol, k - 1, c, 4) != FD_STATUS_OK) return 5;
    printf("%.6f\n", c[0]);
    fd_solution_free(sol);
    fd_model_free(model);
    return 0;
}

#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include "penning.h"

int main(void) {
    PenningTrapParams p = penning_trap_default(7, 0.04, 0.16);
    PenningCrystal *c = NULL;
    if (penning_crystal_solve(&p, 0.0, &c) != PENNING_STATUS_OK) {
        fprintf(stderr, "solve: %s\n", penning_last_error());
        return 1;
    }
    size_t n = penning_crystal_len(c), len = 0;
    double *w = malloc(n * sizeof(double));
    if (penning_axial_frequencies(c, w, n, &len) != PENNING_STATUS_OK || len != n) return 2;
    if (fabs(w[n - 1] - 1.0) > 1e-9) return 3;
    if (penning_planar_frequencies(c, w, n, &len) != PENNING_STATUS_BUFFER_TOO_SMALL || len != 2 * n) return 4;
    if (penning_last_error() == NULL) return 5;
    printf("ok %zu %.12f\n", n, w[n - 1]);
    free(w);
    penning_crystal_free(c);
    return 0;
}

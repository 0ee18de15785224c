#include <stdio.h>
#include <string.h>
#include "oscillab.h"

#define CHECK(x) do { if ((x) != OSC_STATUS_OK) { char m[256]; osc_last_error(m, sizeof m, NULL); fprintf(stderr, "%s: %s\n", #x, m); return 1; } } while (0)

int main(void) {
    double v[4] = {0, 0, 0, 4};
    OscGrid *g = NULL;
    double jn = 0;
    CHECK(osc_grid_new(1, 2, v, 4, &g));
    CHECK(osc_jn_norm(g, NULL, 2.0, &jn));
    osc_grid_free(g);
    if (jn != 1.5) {
        fprintf(stderr, "jn = %g\n", jn);
        return 1;
    }
    if (osc_grid_new(1, 2, v, 3, &g) != OSC_STATUS_INVALID_ARGUMENT) return 1;
    printf("ok %s\n", osc_version());
    return 0;
}

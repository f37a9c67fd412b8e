/* Pitch moments and DTW through the C ABI. */
#include <stdio.h>
#include <stdlib.h>

#include "sfvkit.h"

static int report(int code) {
    char *msg = sfvkit_last_error_message();
    fprintf(stderr, "error %d: %s\n", code, msg ? msg : "(none)");
    sfvkit_string_free(msg);
    return 1;
}

int main(void) {
    const double pool[] = {1.0, 2.0, 3.0, 4.0};
    SfvkitPitchMoments m;
    int rc = sfvkit_pitch_moments(pool, 4, &m);
    if (rc != SFVKIT_OK) {
        return report(rc);
    }
    printf("sigma %.6f gamma %.6f kappa %.6f\n", m.sigma, m.gamma, m.kappa);

    const double a[] = {2.0};
    const double b[] = {5.0};
    double d = 0.0;
    rc = sfvkit_dtw_distance(a, 1, b, 1, 1, &d);
    if (rc != SFVKIT_OK) {
        return report(rc);
    }
    printf("dtw %.3f\n", d);

    rc = sfvkit_pitch_moments(pool, 1, &m);
    if (rc != SFVKIT_ERR_INSUFFICIENT_DATA) {
        return 1;
    }
    char *msg = sfvkit_last_error_message();
    printf("expected failure: %s\n", msg);
    sfvkit_string_free(msg);
    return 0;
}

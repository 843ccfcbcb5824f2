#include <math.h>
#include <stdio.h>
#include <string.h>

#include "offdecay.h"

#define CHECK(cond)                                                    \
    do {                                                               \
        if (!(cond)) {                                                 \
            fprintf(stderr, "failed: %s (%s)\n", #cond, od_last_error()); \
            return 1;                                                  \
        }                                                              \
    } while (0)

int main(void) {
    OdMatrix *a = NULL;
    OdMatrix *inv = NULL;
    double tail = 0.0;
    size_t terms = 0;
    CHECK(od_matrix_shift_example(1.0, 1.0, 8, &a) == OD_STATUS_OK);
    CHECK(od_matrix_size(a) == 17);
    CHECK(od_neumann_inverse(a, 1e-15, &inv, &tail, &terms) == OD_STATUS_OK);
    double re = 0.0, im = 0.0;
    CHECK(od_matrix_get(inv, 0, 3, &re, &im) == OD_STATUS_OK);
    CHECK(fabs(re - exp(-3.0)) < 1e-13);

    double m = 0.0;
    CHECK(od_m_epsilon(1, log(2.0), 1e-14, &m) == OD_STATUS_OK);
    CHECK(fabs(m - 3.0) < 1e-10);

    CHECK(od_m_epsilon(0, 1.0, 1e-14, &m) == OD_STATUS_DOMAIN);
    CHECK(strlen(od_last_error()) > 0);

    char *json = NULL;
    CHECK(od_run_experiment("{\"radius\":8,\"kind\":\"shift_example\",\"k\":1.0}", "jaffard", NULL, &json) ==
          OD_STATUS_OK);
    CHECK(strstr(json, "\"entrywise_pass\":true") != NULL);
    od_string_free(json);

    od_matrix_free(inv);
    od_matrix_free(a);
    printf("ok\n");
    return 0;
}

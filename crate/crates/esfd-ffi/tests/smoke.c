/* Compile-and-run smoke test for the generated header: create an
 * objective and a batch, take both gradient estimates, and check the
 * closed-form difference identity from C. */
#include <math.h>
#include <stdio.h>
#include <string.h>

#include "esfd.h"

#define CHECK(cond)                                                      \
    do {                                                                 \
        if (!(cond)) {                                                   \
            char msg[256];                                               \
            esfd_last_error_message(msg, sizeof msg);                    \
            fprintf(stderr, "FAILED: %s (last error: %s)\n", #cond, msg); \
            return 1;                                                    \
        }                                                                \
    } while (0)

int main(void) {
    double mean = 0.0;
    CHECK(esfd_chi_mean(10, 2.0, &mean) == ESFD_STATUS_OK);
    CHECK(fabs(mean - 2.0 * 3.084327759799864) < 1e-9);
    CHECK(esfd_chi_mean(0, 1.0, &mean) == ESFD_STATUS_DOMAIN_ERROR);

    EsfdObjective *obj = NULL;
    CHECK(esfd_objective_new("sphere", 4, NULL, NULL, 0, &obj) == ESFD_STATUS_OK);
    CHECK(esfd_objective_dim(obj) == 4);

    const double theta[4] = {0.5, -0.25, 1.0, 0.0};
    EsfdBatch *batch = NULL;
    CHECK(esfd_batch_sample(theta, 4, 0.3, 16, 2024, &batch) == ESFD_STATUS_OK);
    CHECK(esfd_batch_dim(batch) == 4 && esfd_batch_lambda(batch) == 16);

    double es[4], central[4], diff[4], r_theta = 0.0;
    CHECK(esfd_gradient_estimate(batch, obj, ESFD_ESTIMATOR_ES, false, es, &r_theta) ==
          ESFD_STATUS_OK);
    CHECK(esfd_gradient_estimate(batch, obj, ESFD_ESTIMATOR_CENTRAL_SUM, false, central, NULL) ==
          ESFD_STATUS_OK);
    CHECK(esfd_gradient_difference(batch, obj, diff) == ESFD_STATUS_OK);
    CHECK(fabs(r_theta - 1.3125) < 1e-12);
    for (int i = 0; i < 4; ++i) {
        CHECK(fabs((central[i] - es[i]) - diff[i]) < 1e-10);
    }

    esfd_batch_free(batch);
    esfd_objective_free(obj);
    puts("c-smoke: ok");
    return 0;
}

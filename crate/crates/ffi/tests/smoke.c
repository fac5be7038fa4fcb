#include <stdio.h>
#include <string.h>

#include "stopmean.h"

int main(void) {
    StopmeanEstimator *est = NULL;
    if (stopmean_estimator_new(STOPMEAN_VARIANT_QUANTIZED, 3, &est) != STOPMEAN_STATUS_OK) {
        return 10;
    }
    const int64_t pattern[3] = {0, 1, 0};
    for (int t = 0; t < 9; t++) {
        StopmeanValue x = {true, pattern[t % 3], 0, 0.0};
        bool done = false;
        StopmeanCompletion c;
        if (stopmean_estimator_step(est, x, &done, &c) != STOPMEAN_STATUS_OK) {
            return 11;
        }
        if (done) {
            printf("%llu,%llu,%.17g\n", (unsigned long long)c.level, (unsigned long long)c.lambda, c.estimate);
        }
    }
    stopmean_estimator_free(est);

    StopmeanSource *src = NULL;
    if (stopmean_source_new("{\"kind\":\"bogus\"}", 1, &src) != STOPMEAN_STATUS_ERROR || src != NULL) {
        return 12;
    }
    if (stopmean_last_error() == NULL || strlen(stopmean_last_error()) == 0) {
        return 13;
    }
    return 0;
}

#include <math.h>
#include <stdio.h>
#include "sleepnet.h"

int main(void) {
    SleepnetParams *p = NULL;
    SleepnetModel *m = NULL;
    SleepnetSimulation *s = NULL;
    SleepnetFigures f;
    SleepnetSimulationFigures e;

    if (sleepnet_params_canonical(0.01, SLEEPNET_FIDELITY_CORRECTED, &p) != SLEEPNET_STATUS_OK) return 1;
    if (sleepnet_model_new(p, &m) != SLEEPNET_STATUS_OK) return 2;
    if (sleepnet_model_figures(m, &f) != SLEEPNET_STATUS_OK) return 3;
    if (sleepnet_simulation_new(p, SLEEPNET_FIDELITY_CORRECTED, 1, 0, &s) != SLEEPNET_STATUS_OK) return 4;
    if (sleepnet_simulation_run(s, 100000) != SLEEPNET_STATUS_OK) return 5;
    if (sleepnet_simulation_figures(s, &e) != SLEEPNET_STATUS_OK) return 6;
    if (sleepnet_params_new(-1.0, 200, 800, 11, 22, 1000, 10, 1, &p) != SLEEPNET_STATUS_INVALID_ARGUMENT) return 7;
    if (sleepnet_last_error() == NULL) return 8;

    printf("%s %.10e %.10e %.3e\n", sleepnet_version(), f.expected_power_saved,
           e.expected_power_saved.value, e.expected_power_saved.std_error);
    sleepnet_simulation_free(s);
    sleepnet_model_free(m);
    sleepnet_params_free(p);
    return fabs(e.expected_power_saved.value - f.expected_power_saved) < 4 * e.expected_power_saved.std_error ? 0 : 9;
}

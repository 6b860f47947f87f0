#include <math.h>
#include <stdio.h>
#include <string.h>

#include "obsproj.h"

#define CHECK(cond)                                              \
    do {                                                         \
        if (!(cond)) {                                           \
            fprintf(stderr, "%s:%d: %s\n", __FILE__, __LINE__, #cond); \
            return 1;                                            \
        }                                                        \
    } while (0)

int main(int argc, char **argv) {
    double a[4] = {-4.0, 1.0, -4.0, 0.0};
    double p[4];
    CHECK(obsproj_solve_lyapunov(a, 2, p) == OBSPROJ_STATUS_OK);
    CHECK(fabs(p[0] - 0.625) < 1e-12 && fabs(p[3] - 0.65625) < 1e-12);

    ObsprojScenario *s = NULL;
    CHECK(obsproj_scenario_from_preset("nope", 0.0, &s) == OBSPROJ_STATUS_INVALID_ARGUMENT);
    CHECK(strlen(obsproj_last_error()) > 0);
    CHECK(obsproj_scenario_from_preset("fig2a", 0.0, &s) == OBSPROJ_STATUS_OK);
    CHECK(obsproj_scenario_set_t_final(s, 0.5) == OBSPROJ_STATUS_OK);

    ObsprojTrajectory *t = NULL;
    CHECK(obsproj_simulate(s, OBSPROJ_FEEDBACK_OUTPUT, &t) == OBSPROJ_STATUS_OK);
    CHECK(obsproj_trajectory_rows(t) == 501);
    CHECK(obsproj_trajectory_columns(t) == 14);
    CHECK(strcmp(obsproj_trajectory_column_name(t, 4), "xhat1") == 0);
    CHECK(obsproj_trajectory_error_name(t) == NULL);

    ObsprojMetrics m;
    CHECK(obsproj_trajectory_metrics(t, NULL, 1e-2, &m) == OBSPROJ_STATUS_OK);
    CHECK(m.peak_xhat > 0.0 && isnan(m.recovery_dev));

    if (argc > 1) {
        CHECK(obsproj_trajectory_write_csv(t, argv[1]) == OBSPROJ_STATUS_OK);
    }
    obsproj_trajectory_free(t);
    obsproj_scenario_free(s);
    printf("ok %s\n", obsproj_version());
    return 0;
}

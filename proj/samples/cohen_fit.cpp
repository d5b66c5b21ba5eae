// Recovers the pre-selection effect from one selected trial with Cohen's ML fit.

#include <cstdio>

#include "sice/sice.hpp"

int main() {
    sice::Scenario sc;
    sc.pop.control = {0.0, 1.0, 0.2};
    sc.pop.treatment = {0.0, 1.0, 0.6};
    sc.rule = {sice::Direction::GreaterThan, 0.0, false};
    sc.n_c = sc.n_t = 1000;

    const sice::RngStream rng{7, 0};
    const auto trial = sice::simulate_trial(sc, rng.child(0));
    const auto naive = sice::ancova_fit(trial.records);
    const auto fit = sice::cohen_ml_effect(trial.records, sc.rule, {}, rng.child(1), 0.05);

    std::printf("true e_o %.4f\n", sc.pop.e_o());
    std::printf("ANCOVA on selected  %.4f (se %.4f)\n", naive.estimate, naive.std_error);
    std::printf("Cohen ML            %.4f (se %.4f, 95%% CI %.4f..%.4f)\n", fit.e_o_hat, fit.std_error(), fit.ci_low,
                fit.ci_high);
}

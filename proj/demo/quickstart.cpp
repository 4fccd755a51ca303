// Small end-to-end run: synthetic events, two-stage and GDF training, policy comparison.

#include "gdf/experiment.hpp"

#include <cstdio>

int main() {
    using namespace gdf;
    config::ExperimentConfig c;
    c.data.events = 6;
    c.data.horizon = 12;
    c.training.pretrain_epochs = 400;
    c.training.finetune_epochs = 5;
    c.validate();

    const io::Dataset data = experiment::synthetic_dataset(c);
    const experiment::Prepared p = experiment::prepare(c, data.events);
    const experiment::Trained t = experiment::train(p, c);
    const auto rows = experiment::evaluate(p, t.two_stage, t.gdf, c.online_lags);

    std::printf("%-16s %12s %12s\n", "method", "cost", "regret");
    for (const auto& m : rows) {
        const auto cost = experiment::summarize(m.events, &experiment::EventRow::cost).mean;
        const auto regret = experiment::summarize(m.events, &experiment::EventRow::regret).mean;
        std::printf("%-16s %12.1f %12.1f\n", m.method.c_str(), cost.value_or(0.0), regret.value_or(0.0));
    }
}

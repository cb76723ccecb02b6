// Deliberately ill-formed: hands the clean references to a training entry
// point. The build graph registers this target with WILL_FAIL, so the suite
// goes red if this ever starts compiling.
#include "idr/pilot.hpp"
#include "idr/scheduler.hpp"

using namespace idr;

int main() {
    const CleanSet clean(make_pilot_corpus(4, 16, 0));
    NoiseSpec spec;
    spec.level_lo = spec.level_hi = 25.0f;
    IdrConfig cfg;
    cfg.mode = RunMode::kBaseline;
    cfg.rounds = 1;
    cfg.iters_per_epoch = 1;

    // training only accepts NoisySet; there is no conversion from CleanSet
    const UNet model = train_baseline(clean, spec, ModelConfig{}, cfg);
    return model.params.empty() ? 1 : 0;
}

// eval.hpp - cross-domain experiment harness: train on one scenario, test on
// others, per-method accuracy/confusion tables, scalability and timing runs.
#pragma once

#include <map>
#include <string>
#include <vector>

#include "blefp/fleet.hpp"
#include "blefp/nn.hpp"

namespace blefp {

struct LengthMismatch : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct CountExceedsFleet : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct ExperimentSpec {
    FleetSpec fleet;
    GfskConfig gfsk;
    std::string train_scenario;
    std::vector<std::string> test_scenarios;
    std::vector<FeatureMethod> methods;
    NetworkConfig nn_config;  // n_classes is overwritten with the fleet size
    int frames_per_device_train = 200;
    int frames_per_device_test = 100;
    uint64_t seed = 1;
    std::map<std::string, DomainScenario> scenarios;  // defaults to paper presets

    void validate() const;
};

struct PhaseTiming {
    double preprocessing_s = 0.0;
    double training_s = 0.0;
    double inference_s = 0.0;
};

struct CellResult {
    double accuracy = 0.0;
    std::vector<std::vector<int>> confusion;  // n_classes x n_classes
};

struct ResultTable {
    // (method, test scenario) -> result
    std::map<std::string, std::map<std::string, CellResult>> cells;
    std::map<std::string, PhaseTiming> timing;  // per method
};

std::vector<std::vector<int>> confusion(const std::vector<int>& predictions,
                                        const std::vector<int>& labels, int n_classes);
double accuracy_from_confusion(const std::vector<std::vector<int>>& m);

ResultTable run_experiment(const ExperimentSpec& spec);

// Nested device subsets (prefixes of the same fleet), one table per count.
std::map<int, ResultTable> scalability_sweep(const ExperimentSpec& spec,
                                             const std::vector<int>& device_counts);

// Median of 3 wall-clock runs per phase; training measured over 10 epochs.
std::map<std::string, PhaseTiming> timing_report(const ExperimentSpec& spec);

void write_accuracy_csv(std::ostream& os, const ResultTable& table, const std::string& method,
                        const std::string& train_scenario);
void write_confusion_csv(std::ostream& os, const CellResult& cell);

}  // namespace blefp

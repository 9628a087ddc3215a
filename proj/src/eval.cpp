#include "blefp/eval.hpp"

#include <algorithm>
#include <chrono>
#include <ostream>

#include "blefp/rng.hpp"

namespace blefp {

namespace {

double now_s() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

std::map<std::string, DomainScenario> resolve_scenarios(const ExperimentSpec& spec) {
    return spec.scenarios.empty() ? make_paper_scenarios() : spec.scenarios;
}

// Train and test frame seeds come from disjoint salt spaces.
constexpr uint64_t kTrainSalt = 0x7121;
constexpr uint64_t kTestSalt = 0x7E57;

FeatureDataset extract_all(const LabeledDataset& ds, FeatureMethod method, const WindowSpec& w) {
    FeatureDataset out;
    out.tensors.reserve(ds.items.size());
    out.labels.reserve(ds.items.size());
    for (const auto& item : ds.items) {
        out.tensors.push_back(extract(method, item.frame, w));
        out.labels.push_back(item.device_id);
    }
    return out;
}

std::vector<int> predict_dataset(Model& model, const FeatureDataset& ds, std::size_t batch_size) {
    std::vector<int> preds;
    preds.reserve(ds.tensors.size());
    for (std::size_t start = 0; start < ds.tensors.size(); start += batch_size) {
        const std::size_t bs = std::min(batch_size, ds.tensors.size() - start);
        Tensor batch = batch_from_features(ds.tensors, start, bs);
        auto p = predict(model, batch);
        preds.insert(preds.end(), p.begin(), p.end());
    }
    return preds;
}

}  // namespace

void ExperimentSpec::validate() const {
    fleet.validate();
    gfsk.validate();
    if (methods.empty()) {
        throw std::invalid_argument("ExperimentSpec: no methods");
    }
    const auto scen = scenarios.empty() ? make_paper_scenarios() : scenarios;
    if (!scen.count(train_scenario)) {
        throw std::invalid_argument("ExperimentSpec: unknown train scenario " + train_scenario);
    }
    for (const auto& s : test_scenarios) {
        if (!scen.count(s)) {
            throw std::invalid_argument("ExperimentSpec: unknown test scenario " + s);
        }
    }
    if (frames_per_device_train < 1 || frames_per_device_test < 1) {
        throw std::invalid_argument("ExperimentSpec: frame counts must be >= 1");
    }
}

std::vector<std::vector<int>> confusion(const std::vector<int>& predictions,
                                        const std::vector<int>& labels, int n_classes) {
    if (predictions.size() != labels.size()) {
        throw LengthMismatch("confusion: prediction/label length mismatch");
    }
    std::vector<std::vector<int>> m(static_cast<std::size_t>(n_classes),
                                    std::vector<int>(static_cast<std::size_t>(n_classes), 0));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        m[static_cast<std::size_t>(labels[i])][static_cast<std::size_t>(predictions[i])]++;
    }
    return m;
}

double accuracy_from_confusion(const std::vector<std::vector<int>>& m) {
    long diag = 0, total = 0;
    for (std::size_t i = 0; i < m.size(); ++i) {
        for (std::size_t j = 0; j < m[i].size(); ++j) {
            total += m[i][j];
            if (i == j) {
                diag += m[i][j];
            }
        }
    }
    return total ? static_cast<double>(diag) / static_cast<double>(total) : 0.0;
}

ResultTable run_experiment(const ExperimentSpec& spec) {
    spec.validate();
    const auto scenarios = resolve_scenarios(spec);
    const auto fleet = sample_fleet(spec.fleet);
    const WindowSpec w = window_length(spec.gfsk);

    const LabeledDataset train_ds =
        generate_dataset(fleet, scenarios.at(spec.train_scenario), spec.frames_per_device_train,
                         spec.gfsk, derive_seed(spec.seed, kTrainSalt));
    std::map<std::string, LabeledDataset> test_sets;
    for (std::size_t i = 0; i < spec.test_scenarios.size(); ++i) {
        const auto& name = spec.test_scenarios[i];
        test_sets.emplace(name, generate_dataset(fleet, scenarios.at(name),
                                                 spec.frames_per_device_test, spec.gfsk,
                                                 derive_seed(spec.seed, kTestSalt, i)));
    }

    ResultTable table;
    for (FeatureMethod method : spec.methods) {
        const std::string mname = to_string(method);
        PhaseTiming timing;

        double t0 = now_s();
        FeatureDataset train_feat = extract_all(train_ds, method, w);
        timing.preprocessing_s = now_s() - t0;

        NetworkConfig cfg = spec.nn_config;
        cfg.n_classes = spec.fleet.n_devices;
        cfg.seed = derive_seed(spec.seed, 0x11A1);
        t0 = now_s();
        Model model = train(train_feat, cfg);
        timing.training_s = now_s() - t0;

        for (const auto& [name, test_ds] : test_sets) {
            FeatureDataset test_feat = extract_all(test_ds, method, w);
            t0 = now_s();
            const auto preds = predict_dataset(model, test_feat,
                                               static_cast<std::size_t>(cfg.batch_size));
            timing.inference_s += now_s() - t0;
            CellResult cell;
            cell.confusion = confusion(preds, test_feat.labels, cfg.n_classes);
            cell.accuracy = accuracy_from_confusion(cell.confusion);
            table.cells[mname][name] = std::move(cell);
        }
        table.timing[mname] = timing;
    }
    return table;
}

std::map<int, ResultTable> scalability_sweep(const ExperimentSpec& spec,
                                             const std::vector<int>& device_counts) {
    std::map<int, ResultTable> out;
    for (int count : device_counts) {
        if (count > spec.fleet.n_devices) {
            throw CountExceedsFleet("scalability_sweep: subset larger than fleet");
        }
        // Prefix subsets: same seed, truncated population.
        ExperimentSpec sub = spec;
        sub.fleet.n_devices = count;
        out.emplace(count, run_experiment(sub));
    }
    return out;
}

std::map<std::string, PhaseTiming> timing_report(const ExperimentSpec& spec) {
    spec.validate();
    const auto scenarios = resolve_scenarios(spec);
    const auto fleet = sample_fleet(spec.fleet);
    const WindowSpec w = window_length(spec.gfsk);
    const LabeledDataset train_ds =
        generate_dataset(fleet, scenarios.at(spec.train_scenario), spec.frames_per_device_train,
                         spec.gfsk, derive_seed(spec.seed, kTrainSalt));
    const LabeledDataset test_ds =
        generate_dataset(fleet, scenarios.at(spec.train_scenario), spec.frames_per_device_test,
                         spec.gfsk, derive_seed(spec.seed, kTestSalt, 0));

    std::map<std::string, PhaseTiming> report;
    for (FeatureMethod method : spec.methods) {
        std::vector<double> pre(3), tr(3), inf(3);
        FeatureDataset train_feat, test_feat;
        for (int run = 0; run < 3; ++run) {
            double t0 = now_s();
            train_feat = extract_all(train_ds, method, w);
            test_feat = extract_all(test_ds, method, w);
            pre[static_cast<std::size_t>(run)] = now_s() - t0;

            NetworkConfig cfg = spec.nn_config;
            cfg.n_classes = spec.fleet.n_devices;
            cfg.epochs = 10;  // timing convention
            cfg.seed = derive_seed(spec.seed, 0x11A1, static_cast<uint64_t>(run));
            t0 = now_s();
            Model model = train(train_feat, cfg);
            tr[static_cast<std::size_t>(run)] = now_s() - t0;

            t0 = now_s();
            (void)predict_dataset(model, test_feat, static_cast<std::size_t>(cfg.batch_size));
            inf[static_cast<std::size_t>(run)] = now_s() - t0;
        }
        auto median = [](std::vector<double> v) {
            std::sort(v.begin(), v.end());
            return v[v.size() / 2];
        };
        PhaseTiming t;
        t.preprocessing_s = median(pre);
        t.training_s = median(tr);
        t.inference_s = median(inf);
        report[to_string(method)] = t;
    }
    return report;
}

void write_accuracy_csv(std::ostream& os, const ResultTable& table, const std::string& method,
                        const std::string& train_scenario) {
    const auto& row = table.cells.at(method);
    os << "train_scenario";
    for (const auto& [name, cell] : row) {
        os << ',' << name;
    }
    os << '\n' << train_scenario;
    os.precision(6);
    for (const auto& [name, cell] : row) {
        os << ',' << cell.accuracy;
    }
    os << '\n';
}

void write_confusion_csv(std::ostream& os, const CellResult& cell) {
    for (const auto& row : cell.confusion) {
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (j) os << ',';
            os << row[j];
        }
        os << '\n';
    }
}

}  // namespace blefp

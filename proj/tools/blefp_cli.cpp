// blefp - command-line front end: synthesize fleets, sweep impairments,
// extract features, train, and run cross-domain experiments. All outputs are
// CSV or JSON; seeds are explicit so reruns are byte-identical (timing aside).

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "blefp/eval.hpp"
#include "blefp/fleet.hpp"
#include "blefp/ingest.hpp"
#include "blefp/nn.hpp"
#include "blefp/rng.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace blefp;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitValidation = 3;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& ctx) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed) {
            if (it.key() == k) {
                ok = true;
                break;
            }
        }
        if (!ok) {
            throw ConfigError("unknown key '" + it.key() + "' in " + ctx);
        }
    }
}

GfskConfig parse_gfsk(const json& j) {
    check_keys(j,
               {"sample_rate_hz", "symbol_rate_hz", "bt_nominal", "f_m_hz", "filter_span_symbols",
                "transient_symbols", "preamble_bits"},
               "gfsk");
    GfskConfig cfg;
    if (j.contains("sample_rate_hz")) cfg.sample_rate_hz = j["sample_rate_hz"].get<double>();
    if (j.contains("symbol_rate_hz")) cfg.symbol_rate_hz = j["symbol_rate_hz"].get<double>();
    if (j.contains("bt_nominal")) cfg.bt_nominal = j["bt_nominal"].get<double>();
    if (j.contains("f_m_hz")) cfg.f_m_hz = j["f_m_hz"].get<double>();
    if (j.contains("filter_span_symbols")) {
        cfg.filter_span_symbols = j["filter_span_symbols"].get<int>();
    }
    if (j.contains("transient_symbols")) cfg.transient_symbols = j["transient_symbols"].get<int>();
    if (j.contains("preamble_bits")) {
        cfg.preamble_bits.clear();
        for (const auto& b : j["preamble_bits"]) {
            cfg.preamble_bits.push_back(b.get<uint8_t>());
        }
    }
    return cfg;
}

Range parse_range(const json& j) {
    if (!j.is_array() || j.size() != 2) {
        throw ConfigError("range must be [min, max]");
    }
    return Range{j[0].get<double>(), j[1].get<double>()};
}

FleetSpec parse_fleet(const json& j) {
    check_keys(j, {"n_devices", "seed", "ranges"}, "fleet");
    FleetSpec spec;
    if (j.contains("n_devices")) spec.n_devices = j["n_devices"].get<int>();
    if (j.contains("seed")) spec.seed = j["seed"].get<uint64_t>();
    if (j.contains("ranges")) {
        const json& r = j["ranges"];
        check_keys(r,
                   {"cfo_hz", "iq_amp", "iq_phase_rad", "i_dc", "q_dc", "delta_f_hz", "bt_actual",
                    "theta_0_rad"},
                   "fleet.ranges");
        if (r.contains("cfo_hz")) spec.cfo_hz = parse_range(r["cfo_hz"]);
        if (r.contains("iq_amp")) spec.iq_amp = parse_range(r["iq_amp"]);
        if (r.contains("iq_phase_rad")) spec.iq_phase_rad = parse_range(r["iq_phase_rad"]);
        if (r.contains("i_dc")) spec.i_dc = parse_range(r["i_dc"]);
        if (r.contains("q_dc")) spec.q_dc = parse_range(r["q_dc"]);
        if (r.contains("delta_f_hz")) spec.delta_f_hz = parse_range(r["delta_f_hz"]);
        if (r.contains("bt_actual")) spec.bt_actual = parse_range(r["bt_actual"]);
        if (r.contains("theta_0_rad")) spec.theta_0_rad = parse_range(r["theta_0_rad"]);
    }
    return spec;
}

NetworkConfig parse_nn(const json& j, int n_classes) {
    check_keys(j,
               {"preset", "conv_blocks", "fc_blocks", "same_padding", "leaky_slope", "lr0",
                "decay_steps", "decay_rate", "staircase_decay", "epochs", "batch_size", "seed",
                "bn_momentum", "bn_eps", "sgd_momentum"},
               "nn");
    NetworkConfig cfg = desk_config(n_classes);
    if (j.contains("preset")) {
        const std::string p = j["preset"].get<std::string>();
        if (p == "desk") {
            cfg = desk_config(n_classes);
        } else if (p == "table1") {
            cfg = table1_config(n_classes);
        } else {
            throw ConfigError("unknown nn preset: " + p);
        }
    }
    if (j.contains("conv_blocks")) {
        cfg.conv_blocks.clear();
        for (const auto& cb : j["conv_blocks"]) {
            cfg.conv_blocks.push_back({cb.at(0).get<int>(), cb.at(1).get<int>()});
        }
    }
    if (j.contains("fc_blocks")) {
        cfg.fc_blocks.clear();
        for (const auto& fb : j["fc_blocks"]) {
            cfg.fc_blocks.push_back({fb.at(0).get<int>(), fb.at(1).get<double>()});
        }
    }
    if (j.contains("same_padding")) cfg.same_padding = j["same_padding"].get<bool>();
    if (j.contains("leaky_slope")) cfg.leaky_slope = j["leaky_slope"].get<double>();
    if (j.contains("lr0")) cfg.lr0 = j["lr0"].get<double>();
    if (j.contains("decay_steps")) cfg.decay_steps = j["decay_steps"].get<int>();
    if (j.contains("decay_rate")) cfg.decay_rate = j["decay_rate"].get<double>();
    if (j.contains("staircase_decay")) cfg.staircase_decay = j["staircase_decay"].get<bool>();
    if (j.contains("epochs")) cfg.epochs = j["epochs"].get<int>();
    if (j.contains("batch_size")) cfg.batch_size = j["batch_size"].get<int>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<uint64_t>();
    if (j.contains("bn_momentum")) cfg.bn_momentum = j["bn_momentum"].get<double>();
    if (j.contains("bn_eps")) cfg.bn_eps = j["bn_eps"].get<double>();
    if (j.contains("sgd_momentum")) cfg.sgd_momentum = j["sgd_momentum"].get<double>();
    return cfg;
}

struct RunConfig {
    uint64_t seed = 1;
    GfskConfig gfsk;
    FleetSpec fleet;
    json nn = json::object();
    std::string train_scenario = "wired-ch1";
    std::vector<std::string> test_scenarios = {"wired-ch1", "wired-ch32"};
    std::vector<FeatureMethod> methods = {FeatureMethod::TPD, FeatureMethod::TP,
                                          FeatureMethod::MBED, FeatureMethod::RAWIQ};
    int frames_per_device_train = 200;
    int frames_per_device_test = 100;
};

RunConfig load_config(const std::string& path) {
    RunConfig rc;
    if (path.empty()) {
        return rc;
    }
    std::ifstream is(path);
    if (!is) {
        throw ConfigError("cannot open config file: " + path);
    }
    json j = json::parse(is);
    check_keys(j, {"seed", "gfsk", "fleet", "nn", "experiment"}, "config");
    if (j.contains("seed")) rc.seed = j["seed"].get<uint64_t>();
    if (j.contains("gfsk")) rc.gfsk = parse_gfsk(j["gfsk"]);
    if (j.contains("fleet")) rc.fleet = parse_fleet(j["fleet"]);
    if (j.contains("nn")) rc.nn = j["nn"];
    if (j.contains("experiment")) {
        const json& e = j["experiment"];
        check_keys(e,
                   {"train_scenario", "test_scenarios", "methods", "frames_per_device_train",
                    "frames_per_device_test"},
                   "experiment");
        if (e.contains("train_scenario")) rc.train_scenario = e["train_scenario"].get<std::string>();
        if (e.contains("test_scenarios")) {
            rc.test_scenarios.clear();
            for (const auto& s : e["test_scenarios"]) {
                rc.test_scenarios.push_back(s.get<std::string>());
            }
        }
        if (e.contains("methods")) {
            rc.methods.clear();
            for (const auto& m : e["methods"]) {
                rc.methods.push_back(feature_method_from_string(m.get<std::string>()));
            }
        }
        if (e.contains("frames_per_device_train")) {
            rc.frames_per_device_train = e["frames_per_device_train"].get<int>();
        }
        if (e.contains("frames_per_device_test")) {
            rc.frames_per_device_test = e["frames_per_device_test"].get<int>();
        }
    }
    return rc;
}

ExperimentSpec to_experiment_spec(const RunConfig& rc) {
    ExperimentSpec spec;
    spec.fleet = rc.fleet;
    spec.gfsk = rc.gfsk;
    spec.train_scenario = rc.train_scenario;
    spec.test_scenarios = rc.test_scenarios;
    spec.methods = rc.methods;
    spec.nn_config = parse_nn(rc.nn, rc.fleet.n_devices);
    spec.frames_per_device_train = rc.frames_per_device_train;
    spec.frames_per_device_test = rc.frames_per_device_test;
    spec.seed = rc.seed;
    return spec;
}

json manifest_for(const RunConfig& rc) {
    json m;
    m["seed"] = rc.seed;
    m["gfsk"] = {{"sample_rate_hz", rc.gfsk.sample_rate_hz},
                 {"symbol_rate_hz", rc.gfsk.symbol_rate_hz},
                 {"bt_nominal", rc.gfsk.bt_nominal},
                 {"f_m_hz", rc.gfsk.f_m_hz},
                 {"filter_span_symbols", rc.gfsk.filter_span_symbols},
                 {"transient_symbols", rc.gfsk.transient_symbols},
                 {"preamble_bits", rc.gfsk.preamble_bits}};
    m["fleet"] = {{"n_devices", rc.fleet.n_devices}, {"seed", rc.fleet.seed}};
    m["experiment"] = {{"train_scenario", rc.train_scenario},
                       {"test_scenarios", rc.test_scenarios},
                       {"frames_per_device_train", rc.frames_per_device_train},
                       {"frames_per_device_test", rc.frames_per_device_test}};
    json methods = json::array();
    for (auto me : rc.methods) {
        methods.push_back(to_string(me));
    }
    m["experiment"]["methods"] = methods;
    m["nn"] = rc.nn;
    return m;
}

std::vector<double> parse_values(const std::string& csv) {
    std::vector<double> values;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        values.push_back(std::stod(tok));
    }
    if (values.empty()) {
        throw ConfigError("--values: no values given");
    }
    return values;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream os(path);
    if (!os) {
        throw IoError("cannot open output file: " + path);
    }
    os.precision(17);
    return os;
}

int cmd_sweep(const RunConfig& rc, const std::string& impairment, const std::string& values_csv,
              const std::string& out_path) {
    const auto values = parse_values(values_csv);
    ImpairmentSet base;
    const auto sweep = impairment_sweep(impairment, values, rc.gfsk, base);
    const WindowSpec w = window_length(rc.gfsk);

    auto os = open_out(out_path);
    os << "impairment,value,channel";
    for (std::size_t i = 0; i + 1 < w.length; ++i) {
        os << ",s" << i;
    }
    os << '\n';
    for (const auto& [value, frame] : sweep) {
        const auto t = tpd(frame, w);
        os << impairment << ',' << value << ",tpd";
        for (double v : t.data[0]) {
            os << ',' << v;
        }
        os << '\n';
    }
    if (impairment == "theta_po" || impairment == "theta_po_rad") {
        // Raw I/Q comparison rows for the phase-offset study.
        for (const auto& [value, frame] : sweep) {
            const auto t = tp(frame, w);
            os << impairment << ',' << value << ",raw_i";
            for (std::size_t i = 0; i + 1 < w.length; ++i) {
                os << ',' << t.data[0][i];
            }
            os << '\n';
        }
    }
    std::cout << "wrote " << out_path << " (" << sweep.size() << " sweep values)\n";
    return 0;
}

int cmd_experiment(const RunConfig& rc, const std::string& out_dir) {
    const ExperimentSpec spec = to_experiment_spec(rc);
    const ResultTable table = run_experiment(spec);
    fs::create_directories(out_dir);
    for (const auto& [method, row] : table.cells) {
        auto os = open_out(out_dir + "/accuracy_" + method + ".csv");
        write_accuracy_csv(os, table, method, spec.train_scenario);
        for (const auto& [scen, cell] : row) {
            auto cs = open_out(out_dir + "/confusion_" + method + "_" + scen + ".csv");
            write_confusion_csv(cs, cell);
        }
    }
    {
        auto os = open_out(out_dir + "/manifest.json");
        os << manifest_for(rc).dump(2) << '\n';
    }
    for (const auto& [method, row] : table.cells) {
        for (const auto& [scen, cell] : row) {
            std::cout << method << " on " << scen << ": accuracy " << cell.accuracy << '\n';
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"BLE GFSK fingerprinting toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_path = "out.csv", out_dir = "results";
    uint64_t seed_override = 0;
    bool seed_set = false;
    app.add_option("--config", config_path, "JSON run configuration");
    app.add_flag_callback("--version", [] { std::cout << "blefp 1.0\n"; });
    auto add_seed = [&](CLI::App* sub) {
        sub->add_option("--seed", seed_override, "override config seed")->each([&](const std::string&) {
            seed_set = true;
        });
    };

    auto* synth = app.add_subcommand("synth", "synthesize a labeled dataset into an IQ capture");
    std::string scenario_name = "wired-ch1";
    int frames = 10;
    synth->add_option("--scenario", scenario_name, "scenario preset name");
    synth->add_option("--frames", frames, "frames per device");
    synth->add_option("--out", out_path, "output capture path (.f32)");
    add_seed(synth);

    auto* sweep = app.add_subcommand("sweep", "impairment sweep, TPD curves as CSV");
    std::string impairment = "cfo_hz", values_csv = "0";
    sweep->add_option("--impairment", impairment, "impairment field name")->required();
    sweep->add_option("--values", values_csv, "comma-separated values")->required();
    sweep->add_option("--out", out_path, "output CSV");
    add_seed(sweep);

    auto* fleet_cmd = app.add_subcommand("fleet", "sample a device fleet and print signatures");
    fleet_cmd->add_option("--out", out_path, "output CSV");
    add_seed(fleet_cmd);

    auto* extract_cmd = app.add_subcommand("extract", "features from a capture file");
    std::string method_name = "TPD", in_path;
    std::string layout_name = "f32";
    std::size_t frame_len = 0;
    extract_cmd->add_option("--in", in_path, "capture file")->required();
    extract_cmd->add_option("--method", method_name, "TPD|TP|MBED|RAWIQ");
    extract_cmd->add_option("--layout", layout_name, "f32|f64");
    extract_cmd->add_option("--frame-len", frame_len, "PREFRAMED frame length (0 = energy detect)");
    extract_cmd->add_option("--out", out_path, "output CSV");

    auto* train_cmd = app.add_subcommand("train", "train a model on the configured train scenario");
    train_cmd->add_option("--method", method_name, "TPD|TP|MBED|RAWIQ");
    train_cmd->add_option("--out", out_path, "model checkpoint path");
    add_seed(train_cmd);

    auto* experiment = app.add_subcommand("experiment", "full cross-domain experiment grid");
    experiment->add_option("--out", out_dir, "output directory");
    add_seed(experiment);

    auto* scalability = app.add_subcommand("scalability", "accuracy vs device count");
    std::string counts_csv = "6,12";
    scalability->add_option("--counts", counts_csv, "comma-separated device counts");
    scalability->add_option("--out", out_path, "output CSV");
    add_seed(scalability);

    auto* timing = app.add_subcommand("timing", "per-phase wall clock medians");
    timing->add_option("--out", out_path, "output CSV");
    add_seed(timing);

    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient audit");
    bool corrupt = false;
    gradcheck->add_flag("--corrupt", corrupt, "negative control: perturb one gradient");

    auto* ingest_cmd = app.add_subcommand("ingest", "read a capture and report detected frames");
    ingest_cmd->add_option("--in", in_path, "capture file")->required();
    ingest_cmd->add_option("--layout", layout_name, "f32|f64");
    ingest_cmd->add_option("--frame-len", frame_len, "PREFRAMED frame length (0 = energy detect)");

    // Let global options (--config, --seed handled per-sub) appear after the
    // subcommand name.
    for (CLI::App* sub : {synth, sweep, fleet_cmd, extract_cmd, train_cmd, experiment, scalability,
                          timing, gradcheck, ingest_cmd}) {
        sub->fallthrough();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        RunConfig rc = load_config(config_path);
        if (seed_set) {
            rc.seed = seed_override;
            rc.fleet.seed = seed_override;
        }

        if (synth->parsed()) {
            const auto scenarios = make_paper_scenarios();
            if (!scenarios.count(scenario_name)) {
                throw ConfigError("unknown scenario: " + scenario_name);
            }
            const auto fleet = sample_fleet(rc.fleet);
            const auto ds =
                generate_dataset(fleet, scenarios.at(scenario_name), frames, rc.gfsk, rc.seed);
            CaptureSpec cap;
            cap.path = out_path;
            cap.sample_rate_hz = rc.gfsk.sample_rate_hz;
            cap.layout = SampleLayout::InterleavedF32;
            std::vector<IqFrame> frames_out;
            frames_out.reserve(ds.items.size());
            for (const auto& it : ds.items) {
                frames_out.push_back(it.frame);
            }
            write_capture(frames_out, cap);
            std::cout << "wrote " << frames_out.size() << " frames to " << out_path << '\n';
            return 0;
        }
        if (sweep->parsed()) {
            return cmd_sweep(rc, impairment, values_csv, out_path);
        }
        if (fleet_cmd->parsed()) {
            auto os = open_out(out_path);
            os << "device_id,cfo_hz,iq_amp,iq_phase_rad,i_dc,q_dc,delta_f_hz,bt_actual,theta_0_rad\n";
            for (const auto& d : sample_fleet(rc.fleet)) {
                os << d.device_id << ',' << d.imp.cfo_hz << ',' << d.imp.iq_amp << ','
                   << d.imp.iq_phase_rad << ',' << d.imp.i_dc << ',' << d.imp.q_dc << ','
                   << d.imp.delta_f_hz << ',' << d.imp.bt_actual << ',' << d.imp.theta_po_rad
                   << '\n';
            }
            std::cout << "wrote " << out_path << '\n';
            return 0;
        }
        if (extract_cmd->parsed() || ingest_cmd->parsed()) {
            CaptureSpec cap;
            cap.path = in_path;
            cap.sample_rate_hz = rc.gfsk.sample_rate_hz;
            cap.layout = layout_name == "f64" ? SampleLayout::InterleavedF64
                                              : SampleLayout::InterleavedF32;
            if (frame_len > 0) {
                cap.framing.kind = Framing::Kind::Preframed;
                cap.framing.frame_len = frame_len;
            } else {
                cap.framing.kind = Framing::Kind::EnergyDetect;
            }
            const auto frames_in = read_capture(cap);
            if (ingest_cmd->parsed()) {
                std::cout << "detected " << frames_in.size() << " frames\n";
                for (std::size_t i = 0; i < frames_in.size(); ++i) {
                    std::cout << "frame " << i << ": " << frames_in[i].samples.size()
                              << " samples\n";
                }
                return 0;
            }
            const auto method = feature_method_from_string(method_name);
            const WindowSpec w = window_length(rc.gfsk);
            auto os = open_out(out_path);
            for (const auto& f : frames_in) {
                write_feature_csv(os, extract(method, f, w), f.meta);
            }
            std::cout << "wrote " << out_path << '\n';
            return 0;
        }
        if (train_cmd->parsed()) {
            const ExperimentSpec spec = to_experiment_spec(rc);
            const auto scenarios = make_paper_scenarios();
            const auto fleet = sample_fleet(spec.fleet);
            const auto ds = generate_dataset(fleet, scenarios.at(spec.train_scenario),
                                             spec.frames_per_device_train, spec.gfsk,
                                             derive_seed(spec.seed, 0x7121));
            const auto method = feature_method_from_string(method_name);
            const WindowSpec w = window_length(spec.gfsk);
            FeatureDataset feat;
            for (const auto& it : ds.items) {
                feat.tensors.push_back(extract(method, it.frame, w));
                feat.labels.push_back(it.device_id);
            }
            NetworkConfig cfg = spec.nn_config;
            cfg.n_classes = spec.fleet.n_devices;
            Model model = train(feat, cfg);
            save_model(model, out_path);
            std::cout << "saved model to " << out_path << '\n';
            return 0;
        }
        if (experiment->parsed()) {
            return cmd_experiment(rc, out_dir);
        }
        if (scalability->parsed()) {
            std::vector<int> counts;
            for (double v : parse_values(counts_csv)) {
                counts.push_back(static_cast<int>(v));
            }
            const ExperimentSpec spec = to_experiment_spec(rc);
            const auto tables = scalability_sweep(spec, counts);
            auto os = open_out(out_path);
            os << "devices,method,test_scenario,accuracy\n";
            for (const auto& [count, table] : tables) {
                for (const auto& [method, row] : table.cells) {
                    for (const auto& [scen, cell] : row) {
                        os << count << ',' << method << ',' << scen << ',' << cell.accuracy
                           << '\n';
                    }
                }
            }
            std::cout << "wrote " << out_path << '\n';
            return 0;
        }
        if (timing->parsed()) {
            const ExperimentSpec spec = to_experiment_spec(rc);
            const auto report = timing_report(spec);
            auto os = open_out(out_path);
            os << "method,preprocessing_s,training_s,inference_s\n";
            for (const auto& [method, t] : report) {
                os << method << ',' << t.preprocessing_s << ',' << t.training_s << ','
                   << t.inference_s << '\n';
            }
            std::cout << "wrote " << out_path << '\n';
            return 0;
        }
        if (gradcheck->parsed()) {
            NetworkConfig cfg;
            cfg.conv_blocks = {{3, 3}, {4, 3}};
            cfg.fc_blocks = {{8, 0.0}};
            cfg.n_classes = 3;
            const auto report = gradient_check(cfg, 1, 16, 4, 1e-5, 1e-4, 7, corrupt);
            for (const auto& e : report.entries) {
                std::cout << e.name << ": max rel err " << e.max_rel_err << '\n';
            }
            std::cout << (report.pass ? "PASS" : "FAIL") << " (max " << report.max_rel_err
                      << ")\n";
            return report.pass ? 0 : kExitValidation;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "validation error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    }
    return 0;
}

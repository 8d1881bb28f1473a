// Command-line front end: synthesize | ingest-check | train | predict |
// evaluate | ablate. Exit code 0 on success; failures print one line
// "error <class>: <message>" and map the class to a stable nonzero code.

#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "tse/pipeline.hpp"
#include "tse/synthetic.hpp"

using namespace tse;
using nlohmann::json;

namespace {

int exit_code_for(const std::string& cls) {
    if (cls == "usage") return 2;
    if (cls == "config") return 3;
    if (cls == "io") return 4;
    if (cls == "format") return 5;
    if (cls == "validation") return 6;
    if (cls == "train") return 7;
    if (cls == "digest") return 8;
    return 1;
}

std::string one_line(std::string s) {
    for (char& c : s)
        if (c == '\n') c = ' ';
    return s;
}

SyntheticSpec spec_from_json(const std::string& path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        fail("config", std::string("spec is not valid JSON: ") + e.what());
    }
    SyntheticSpec s;
    for (const auto& [key, value] : j.items()) {
        if (key == "city") s.city = value.get<std::string>();
        else if (key == "nodes") s.nodes = value.get<int>();
        else if (key == "extra_edges") s.extra_edges = value.get<int>();
        else if (key == "counter_every") s.counter_every = value.get<int>();
        else if (key == "supersegments") s.supersegments = value.get<int>();
        else if (key == "train_days") s.train_days = value.get<int>();
        else if (key == "test_days") s.test_days = value.get<int>();
        else if (key == "start_date") s.start_date = Date::parse(value.get<std::string>());
        else if (key == "snapshots_per_day") s.snapshots_per_day = value.get<int>();
        else if (key == "volume_amplitude") s.volume_amplitude = value.get<double>();
        else if (key == "volume_noise") s.volume_noise = value.get<double>();
        else if (key == "missing_rate") s.missing_rate = value.get<double>();
        else if (key == "label_coverage") s.label_coverage = value.get<double>();
        else if (key == "eta_base") s.eta_base = value.get<double>();
        else if (key == "eta_modulation") s.eta_modulation = value.get<double>();
        else if (key == "eta_noise") s.eta_noise = value.get<double>();
        else if (key == "weekday_signal") s.weekday_signal = value.get<bool>();
        else if (key == "seed") s.seed = value.get<uint64_t>();
        else fail("config", "unknown spec key '" + key + "'");
    }
    return s;
}

struct CommonArgs {
    std::string config_path;
    std::string city;
    std::string out;
    int64_t seed = -1;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required) {
    auto* opt = cmd->add_option("--config", args.config_path, "pipeline config JSON");
    if (config_required) opt->required();
    cmd->add_option("--city", args.city, "override the configured city");
    cmd->add_option("--out", args.out, "override the configured output directory");
    cmd->add_option("--seed", args.seed, "override the configured seed");
}

PipelineConfig load_config(const CommonArgs& args) {
    PipelineConfig cfg = PipelineConfig::from_json_file(args.config_path);
    if (!args.city.empty()) cfg.city = args.city;
    if (!args.out.empty()) cfg.out_dir = args.out;
    if (args.seed >= 0) cfg.seed = static_cast<uint64_t>(args.seed);
    cfg.validate();
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"two-stage gradient boosting for short-term traffic state estimation"};
    app.require_subcommand(1);

    // synthesize
    auto* syn = app.add_subcommand("synthesize", "generate a synthetic city dataset");
    std::string syn_out = "data/synthtown";
    std::string syn_spec_path, syn_city;
    int64_t syn_seed = -1;
    syn->add_option("--out", syn_out, "dataset directory to write");
    syn->add_option("--spec", syn_spec_path, "synthetic spec JSON (optional)");
    syn->add_option("--city", syn_city, "city name override");
    syn->add_option("--seed", syn_seed, "seed override");

    CommonArgs check_args, train_args, predict_args, eval_args, ablate_args;
    auto* check = app.add_subcommand("ingest-check", "validate a dataset on disk");
    add_common(check, check_args, true);
    auto* train = app.add_subcommand("train", "two-phase training, writes the bundle");
    add_common(train, train_args, true);
    auto* predict = app.add_subcommand("predict", "write predictions for the test split");
    add_common(predict, predict_args, true);
    auto* evaluate = app.add_subcommand("evaluate", "score the pipeline on the test split");
    add_common(evaluate, eval_args, true);
    auto* ablate_cmd = app.add_subcommand("ablate", "context ablation study");
    add_common(ablate_cmd, ablate_args, true);

    CLI11_PARSE(app, argc, argv);

    try {
        if (syn->parsed()) {
            SyntheticSpec spec;
            if (!syn_spec_path.empty()) spec = spec_from_json(syn_spec_path);
            if (!syn_city.empty()) spec.city = syn_city;
            if (syn_seed >= 0) spec.seed = static_cast<uint64_t>(syn_seed);
            synthesize_to_dir(spec, syn_out);
            std::cout << "wrote dataset to " << syn_out << "\n";
        } else if (check->parsed()) {
            PipelineConfig cfg = load_config(check_args);
            Dataset data = ingest_dataset(cfg.data_dir);
            std::cout << "ok: city=" << data.city << " nodes=" << data.graph.nodes.size()
                      << " edges=" << data.graph.edges.size()
                      << " supersegments=" << data.graph.supersegments.size()
                      << " train_instances=" << data.train.size()
                      << " test_instances=" << data.test.size() << "\n";
        } else if (train->parsed()) {
            PipelineConfig cfg = load_config(train_args);
            train_full(cfg);
            std::cout << "wrote " << cfg.out_dir << "/bundle.bin\n";
        } else if (predict->parsed()) {
            PipelineConfig cfg = load_config(predict_args);
            predict_cmd(cfg);
            std::cout << "wrote predictions to " << cfg.out_dir << "\n";
        } else if (evaluate->parsed()) {
            PipelineConfig cfg = load_config(eval_args);
            EvalReport report = evaluate_cmd(cfg);
            std::cout << report.to_text();
        } else if (ablate_cmd->parsed()) {
            PipelineConfig cfg = load_config(ablate_args);
            AblationReport report = ablate(cfg);
            std::cout << report.to_text();
        }
    } catch (const Error& e) {
        std::cerr << "error " << e.cls() << ": " << one_line(e.what()) << "\n";
        return exit_code_for(e.cls());
    } catch (const std::exception& e) {
        std::cerr << "error internal: " << one_line(e.what()) << "\n";
        return 1;
    }
    return 0;
}

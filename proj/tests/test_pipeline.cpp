#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "tse/pipeline.hpp"
#include "tse/synthetic.hpp"

using namespace tse;
namespace fs = std::filesystem;

namespace {

SyntheticSpec small_spec(uint64_t seed = 3) {
    SyntheticSpec spec;
    spec.nodes = 12;
    spec.extra_edges = 4;
    spec.counter_every = 3;
    spec.supersegments = 4;
    spec.train_days = 28;  // 4 whole weeks
    spec.test_days = 3;
    spec.snapshots_per_day = 4;
    spec.seed = seed;
    return spec;
}

PipelineConfig small_config(const std::string& root) {
    PipelineConfig cfg;
    cfg.city = "synthtown";
    cfg.data_dir = root + "/data";
    cfg.out_dir = root + "/out";
    cfg.validation_weeks = 1;
    cfg.seed = 11;
    cfg.presets.a.num_rounds = 25;
    cfg.presets.b.num_rounds = 15;
    return cfg;
}

std::string fresh_dir(const std::string& name) {
    std::string dir = "tmp_" + name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const std::string& path) { return read_text_file(path); }

void patch_line(const std::string& path, int line_no, const std::string& content) {
    std::ifstream in(path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    in.close();
    lines[line_no - 1] = content;
    std::ofstream out(path, std::ios::trunc);
    for (const auto& l : lines) out << l << "\n";
}

}  // namespace

TEST_CASE("synthesize is deterministic and round-trips through ingest") {
    std::string root = fresh_dir("synth");
    SyntheticSpec spec = small_spec();
    synthesize_to_dir(spec, root + "/a");
    synthesize_to_dir(spec, root + "/b");

    for (const char* rel :
         {"/graph.csv", "/train/snapshots.csv", "/train/labels_core.csv",
          "/train/labels_extended.csv", "/test/snapshots.csv"})
        CHECK(slurp(root + "/a" + rel) == slurp(root + "/b" + rel));

    SUBCASE("different seeds differ") {
        SyntheticSpec other = spec;
        other.seed = spec.seed + 1;
        synthesize_to_dir(other, root + "/c");
        CHECK(slurp(root + "/a/train/snapshots.csv") !=
              slurp(root + "/c/train/snapshots.csv"));
    }

    SUBCASE("write - ingest - write is the identity on files") {
        Dataset data = ingest_dataset(root + "/a");
        write_dataset(root + "/again", data);
        for (const char* rel :
             {"/graph.csv", "/train/snapshots.csv", "/train/labels_core.csv",
              "/train/labels_extended.csv", "/test/labels_extended.csv"})
            CHECK(slurp(root + "/a" + rel) == slurp(root + "/again" + rel));
    }

    SUBCASE("generated graphs validate cleanly") {
        Dataset data = ingest_dataset(root + "/a");
        CHECK(validate_graph(data.graph).empty());
    }
}

TEST_CASE("ingest rejects broken files with file and line context") {
    std::string root = fresh_dir("ingest");
    synthesize_to_dir(small_spec(), root);

    SUBCASE("unknown edge in core labels") {
        patch_line(root + "/train/labels_core.csv", 3, "2022-03-07,10,999,red");
        try {
            ingest_dataset(root);
            FAIL("expected an error");
        } catch (const Error& e) {
            std::string msg = e.what();
            CHECK(msg.find("labels_core.csv:3") != std::string::npos);
            CHECK(msg.find("999") != std::string::npos);
        }
    }
    SUBCASE("duplicate label row") {
        std::string path = root + "/train/labels_core.csv";
        std::string first_data_line;
        {
            std::ifstream in(path);
            std::string header;
            std::getline(in, header);
            std::getline(in, first_data_line);
        }
        patch_line(path, 3, first_data_line);
        CHECK_THROWS_AS(ingest_dataset(root), Error);
    }
    SUBCASE("edge referencing an absent node") {
        // first edge row sits at line 4 + node count
        Dataset data = ingest_dataset(root);
        int line = 3 + static_cast<int>(data.graph.nodes.size()) + 3;
        patch_line(root + "/graph.csv", line, "500,1,999,0,0,3,50,60,1,100,0.5,1");
        CHECK_THROWS_AS(ingest_dataset(root), Error);
    }
    SUBCASE("malformed numeric cell") {
        patch_line(root + "/train/snapshots.csv", 2, "2022-03-07,10,1,abc,1,1,1");
        CHECK_THROWS_AS(ingest_dataset(root), Error);
    }
}

TEST_CASE("validation split picks whole calendar weeks") {
    SyntheticSpec spec = small_spec();
    spec.train_days = 70;  // 10 whole weeks
    spec.snapshots_per_day = 2;
    Dataset data = synthesize(spec);

    ValidationSplit split = split_validation(data.train, 2, 42);

    auto count_days = [](const std::vector<const Instance*>& v) {
        std::set<int32_t> days;
        for (const auto* i : v) days.insert(i->date.key());
        return days;
    };
    auto train_days = count_days(split.train);
    auto valid_days = count_days(split.valid);
    CHECK(train_days.size() == 56);
    CHECK(valid_days.size() == 14);
    for (int32_t d : valid_days) CHECK(train_days.count(d) == 0);

    SUBCASE("same seed gives the same split") {
        ValidationSplit again = split_validation(data.train, 2, 42);
        CHECK(count_days(again.valid) == valid_days);
    }
    SUBCASE("validation days form whole weeks") {
        std::set<int64_t> weeks;
        for (const auto* i : split.valid)
            weeks.insert((i->date.serial() - i->date.day_of_week()) / 7);
        CHECK(weeks.size() == 2);
        CHECK(valid_days.size() == 7 * weeks.size());
    }
    SUBCASE("insufficient span errors") {
        CHECK_THROWS_AS(split_validation(data.train, 10, 42), Error);
        CHECK_THROWS_AS(split_validation(data.train, 11, 42), Error);
    }
}

TEST_CASE("two-phase training protocol") {
    std::string root = fresh_dir("train");
    synthesize_to_dir(small_spec(), root + "/data");
    PipelineConfig cfg = small_config(root);

    Dataset data = ingest_dataset(cfg.data_dir);
    ValidationSplit split = split_validation(data.train, cfg.validation_weeks, cfg.seed);

    // phase 1 by hand to learn the expected best rounds
    GraphIndex gi(data.graph);
    StageOneModel s1 =
        train_stage1(split.train, gi, cfg.presets, cfg.city, cfg.seed, &split.valid);
    StageTwoModel s2 = train_stage2(split.train, gi, cfg.presets, cfg.city,
                                    cfg.pseudocount, cfg.seed, &split.valid);

    ModelBundle bundle = train_full_on(cfg, data, split);

    SUBCASE("phase-2 tree counts equal the recorded best rounds") {
        auto s1_rounds = s1.best_rounds();
        for (size_t i = 0; i < bundle.stage1.models.size(); ++i)
            CHECK(bundle.stage1.models[i].rounds_built() == s1_rounds[i]);
        auto s2_rounds = s2.best_rounds();
        CHECK(bundle.stage2.core_a.rounds_built() == s2_rounds[0]);
        CHECK(bundle.stage2.core_a.trees.size() ==
              static_cast<size_t>(s2_rounds[0]) * 3);  // 3 trees per round
        CHECK(bundle.stage2.core_b.rounds_built() == s2_rounds[1]);
        CHECK(bundle.stage2.extended.rounds_built() == s2_rounds[2]);
    }

    SUBCASE("phase 2 is reproducible from data plus recorded rounds alone") {
        ModelBundle r1 = retrain_phase2(cfg, data, s1.best_rounds(), s2.best_rounds());
        ModelBundle r2 = retrain_phase2(cfg, data, s1.best_rounds(), s2.best_rounds());
        CHECK(serialize_bundle(r1) == serialize_bundle(r2));
        CHECK(serialize_bundle(r1) == serialize_bundle(bundle));
    }

    SUBCASE("an empty validation split reuses phase 1 as the final model") {
        ValidationSplit all_train;
        all_train.train = instance_ptrs(data.train);
        ModelBundle b2 = train_full_on(cfg, data, all_train);
        // with no validation, best_round equals the configured round count
        CHECK(b2.stage2.core_a.best_round == cfg.presets.a.num_rounds);
        CHECK(b2.stage2.core_a.rounds_built() == cfg.presets.a.num_rounds);
        ModelBundle b3 = train_full_on(cfg, data, all_train);
        CHECK(serialize_bundle(b2) == serialize_bundle(b3));
    }

    SUBCASE("bundle save and load round-trips") {
        save_bundle(root + "/bundle.bin", bundle);
        ModelBundle back = load_bundle(root + "/bundle.bin");
        CHECK(serialize_bundle(back) == serialize_bundle(bundle));
    }
}

TEST_CASE("prediction and evaluation commands") {
    std::string root = fresh_dir("cmd");
    synthesize_to_dir(small_spec(17), root + "/data");
    PipelineConfig cfg = small_config(root);
    train_full(cfg);

    predict_cmd(cfg);
    Dataset data = ingest_dataset(cfg.data_dir);
    size_t n_test = data.test.size();
    size_t n_edges = data.graph.edges.size();
    size_t n_segs = data.graph.supersegments.size();

    auto line_count = [](const std::string& path) {
        std::string text = read_text_file(path);
        return static_cast<size_t>(std::count(text.begin(), text.end(), '\n'));
    };
    CHECK(line_count(cfg.out_dir + "/core_predictions.csv") == 1 + n_test * n_edges);
    CHECK(line_count(cfg.out_dir + "/extended_predictions.csv") == 1 + n_test * n_segs);
    CHECK(line_count(cfg.out_dir + "/contexts.csv") == 1 + n_test);

    SUBCASE("probability rows in the output sum to one") {
        std::ifstream in(cfg.out_dir + "/core_predictions.csv");
        std::string line;
        std::getline(in, line);  // header
        int checked = 0;
        while (std::getline(in, line) && checked < 200) {
            double p[3];
            size_t pos = 0;
            for (int k = 0; k < 2; ++k) pos = line.find(',', pos) + 1;
            for (int k = 0; k < 3; ++k) {
                size_t next = line.find(',', pos);
                p[k] = std::stod(line.substr(pos, next - pos));
                pos = next + 1;
            }
            CHECK(std::fabs(p[0] + p[1] + p[2] - 1.0) < 1e-6);
            ++checked;
        }
        CHECK(checked > 0);
    }

    SUBCASE("rerunning predict is byte-identical") {
        std::string before = slurp(cfg.out_dir + "/core_predictions.csv");
        predict_cmd(cfg);
        CHECK(slurp(cfg.out_dir + "/core_predictions.csv") == before);
    }

    SUBCASE("evaluate writes a full report") {
        EvalReport report = evaluate_cmd(cfg);
        CHECK(report.snapshots == n_test);
        CHECK(report.core_rows == n_test * n_edges);
        CHECK(report.core_loss > 0.0);
        CHECK(report.extended_mae > 0.0);
        std::string text = slurp(cfg.out_dir + "/eval_report.txt");
        CHECK(text.find("core_loss:") != std::string::npos);
        CHECK(text.find("stage1_slot_accuracy:") != std::string::npos);
    }

    SUBCASE("a changed config is refused at predict time") {
        PipelineConfig other = cfg;
        other.seed = cfg.seed + 1;
        try {
            predict_cmd(other);
            FAIL("expected a digest error");
        } catch (const Error& e) {
            CHECK(e.cls() == "digest");
        }
    }
}

TEST_CASE("ablation report structure") {
    std::string root = fresh_dir("ablate");
    synthesize_to_dir(small_spec(23), root + "/data");
    PipelineConfig cfg = small_config(root);
    ModelBundle bundle = train_full(cfg);
    Dataset data = ingest_dataset(cfg.data_dir);

    AblationReport report = ablate_on(cfg, data, bundle);
    CHECK(report.predicted.core_loss > 0);
    CHECK(report.nulled.core_loss > 0);
    CHECK(report.retrained.core_loss > 0);
    CHECK(report.ground_truth.core_loss > 0);
    CHECK(report.te_only.core_loss > 0);
    CHECK(report.delta_core_pct ==
          doctest::Approx((report.predicted.core_loss - report.ground_truth.core_loss) /
                          report.predicted.core_loss * 100.0));

    std::string text = report.to_text();
    CHECK(text.find("core_loss_predicted:") != std::string::npos);
    CHECK(text.find("core_loss_te_only:") != std::string::npos);
    CHECK(text.find("delta_core_pct:") != std::string::npos);
}

TEST_CASE("degenerate weekday signal leaves day-of-week near chance") {
    SyntheticSpec spec = small_spec(29);
    spec.weekday_signal = false;
    spec.train_days = 42;
    spec.test_days = 14;
    spec.snapshots_per_day = 6;
    Dataset data = synthesize(spec);
    GraphIndex gi(data.graph);

    StagePresets presets;
    presets.a.num_rounds = 60;
    presets.b.num_rounds = 40;
    auto ptrs = instance_ptrs(data.train);
    StageOneModel s1 = train_stage1(ptrs, gi, presets, data.city, 5);

    std::vector<TimeContext> predicted, truth;
    for (const auto& inst : data.test) {
        predicted.push_back(predict_context(s1, inst.snapshot));
        truth.push_back(inst.context());
    }
    auto scores = stage1_metric(predicted, truth);
    CHECK(scores[1].accuracy < 0.45);  // chance is 1/7
}

TEST_CASE("pipeline config parsing") {
    SUBCASE("round trip with overrides") {
        std::string text = R"({
            "city": "demo",
            "data_dir": "d",
            "out_dir": "o",
            "pseudocount": 10.0,
            "validation_weeks": 3,
            "seed": 99,
            "preset_a": {"num_rounds": 42, "learning_rate": 0.02},
            "preset_b": {"num_rounds": 17}
        })";
        PipelineConfig cfg = PipelineConfig::from_json_text(text);
        CHECK(cfg.city == "demo");
        CHECK(cfg.pseudocount == 10.0);
        CHECK(cfg.validation_weeks == 3);
        CHECK(cfg.presets.a.num_rounds == 42);
        CHECK(cfg.presets.a.learning_rate == 0.02);
        CHECK(cfg.presets.b.num_rounds == 17);
        CHECK(cfg.presets.b.learning_rate == 0.1);
        CHECK(cfg.presets.a.early_stopping_rounds == 1000);
    }
    SUBCASE("unknown keys are rejected") {
        CHECK_THROWS_AS(PipelineConfig::from_json_text(R"({"ctiy": "x"})"), Error);
    }
    SUBCASE("digest tracks training-relevant fields only") {
        PipelineConfig a, b;
        b.out_dir = "elsewhere";
        CHECK(a.digest() == b.digest());
        b.seed = 123;
        CHECK(a.digest() != b.digest());
        PipelineConfig c;
        c.presets.a.num_rounds += 1;
        CHECK(a.digest() != c.digest());
    }
}

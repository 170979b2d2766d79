// Exercises the shared library through the C header only; no internal
// headers, so this binary doubles as a link check for external consumers.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <cdd/cdd.h>

namespace {

namespace fs = std::filesystem;

class Scratch {
public:
    Scratch() {
        std::mt19937_64 rng{std::random_device{}()};
        dir_ = fs::temp_directory_path() / ("cdd-capi-" + std::to_string(rng()));
        fs::create_directory(dir_);
    }
    ~Scratch() {
        std::error_code ec;
        fs::remove_all(dir_, ec);
    }
    std::string file(const std::string& name) const { return (dir_ / name).string(); }
    std::string dir() const { return dir_.string(); }

    void write(const std::string& name, const std::string& text) const {
        std::ofstream out(dir_ / name, std::ios::binary);
        out << text;
    }

private:
    fs::path dir_;
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// 80 deterministic records; job drives the outcome and leans with sex
std::string fixture_csv() {
    std::string csv = "age,job,sex,outcome\n";
    for (int i = 0; i < 80; ++i) {
        const bool female = i % 2 == 0;
        const bool office = (i % 10 < 6) == female;
        const bool positive = office && i % 4 != 0;
        csv += std::to_string(20 + i % 40);
        csv += office ? ",office," : ",field,";
        csv += female ? "F," : "M,";
        csv += positive ? "yes\n" : "no\n";
    }
    return csv;
}

std::string fixture_config(bool with_tamper, int min_leaf = 5) {
    std::string json = R"({
      "dataset": {"path": "t.csv"},
      "attributes": [
        {"name": "age", "kind": "numeric"},
        {"name": "job", "kind": "categorical"},
        {"name": "sex", "kind": "categorical"},
        {"name": "outcome", "kind": "categorical"}
      ],
      "group": {"attribute": "sex", "protected": "F"},
      "decision": {"attribute": "outcome", "positive": ["yes"]},
      "analysis": {"k": 15, "alpha": 0.1, "bins": 10, "min_count": 5, "seed": 1},
      "tree": {"min_leaf": )" + std::to_string(min_leaf) +
                       R"(, "max_depth": 4})";
    if (with_tamper)
        json += R"1(,
      "tamper": {"conditions": [{"attr": "job", "values": ["office"]}],
                 "fraction": 0.5, "seed": 9})1";
    return json + "\n}\n";
}

struct Fixture {
    Scratch scratch;
    cdd_config* cfg = nullptr;
    cdd_dataset* raw = nullptr;
    cdd_dataset* norm = nullptr;

    explicit Fixture(bool with_tamper = false, int min_leaf = 5) {
        scratch.write("t.csv", fixture_csv());
        REQUIRE(cdd_config_parse(fixture_config(with_tamper, min_leaf).c_str(),
                                 scratch.dir().c_str(), &cfg) == CDD_OK);
        REQUIRE(cdd_dataset_load(cfg, &raw) == CDD_OK);
        REQUIRE(cdd_dataset_normalize(raw, &norm) == CDD_OK);
    }
    ~Fixture() {
        cdd_dataset_free(norm);
        cdd_dataset_free(raw);
        cdd_config_free(cfg);
    }
};

} // namespace

TEST_CASE("version and error channel") {
    REQUIRE(cdd_version() != nullptr);
    CHECK(std::strlen(cdd_version()) > 0);
    REQUIRE(cdd_last_error() != nullptr);

    cdd_config* cfg = nullptr;
    CHECK(cdd_config_parse("not json", nullptr, &cfg) == CDD_ERR_RUN);
    CHECK(cfg == nullptr);
    const std::string msg = cdd_last_error();
    CHECK(msg.find("[config]") != std::string::npos);
    CHECK(msg.find("valid JSON") != std::string::npos);
}

TEST_CASE("null arguments are rejected, never dereferenced") {
    cdd_config* cfg = nullptr;
    CHECK(cdd_config_load(nullptr, &cfg) == CDD_ERR_INVALID_ARGUMENT);
    CHECK(std::string(cdd_last_error()).find("must not be NULL") != std::string::npos);
    CHECK(cdd_config_parse("{}", nullptr, nullptr) == CDD_ERR_INVALID_ARGUMENT);
    CHECK(cdd_dataset_load(nullptr, nullptr) == CDD_ERR_INVALID_ARGUMENT);
    CHECK(cdd_dataset_size(nullptr) == 0);
    CHECK(cdd_dataset_count(nullptr, -1, -1) == 0);
    CHECK(cdd_scores_count(nullptr) == 0);
    CHECK(cdd_model_fit(nullptr, nullptr, nullptr) == CDD_ERR_INVALID_ARGUMENT);
    CHECK(cdd_pipeline_run(nullptr, "x") == CDD_ERR_INVALID_ARGUMENT);
    // frees tolerate NULL
    cdd_config_free(nullptr);
    cdd_dataset_free(nullptr);
    cdd_model_free(nullptr);
    cdd_scores_free(nullptr);
    cdd_tree_free(nullptr);
    cdd_ids_free(nullptr);
}

TEST_CASE("config load, set, and validation") {
    Fixture fx;
    SUBCASE("cdd_config_load reads the same document from disk") {
        fx.scratch.write("run.json", fixture_config(false));
        cdd_config* cfg = nullptr;
        REQUIRE(cdd_config_load(fx.scratch.file("run.json").c_str(), &cfg) == CDD_OK);
        cdd_dataset* ds = nullptr;
        REQUIRE(cdd_dataset_load(cfg, &ds) == CDD_OK);
        CHECK(cdd_dataset_size(ds) == 80);
        cdd_dataset_free(ds);
        cdd_config_free(cfg);
    }
    SUBCASE("valid overrides") {
        CHECK(cdd_config_set(fx.cfg, "k", "7") == CDD_OK);
        CHECK(cdd_config_set(fx.cfg, "max_distance", "0.5") == CDD_OK);
        CHECK(cdd_config_set(fx.cfg, "alpha", "0.2") == CDD_OK);
        CHECK(cdd_config_set(fx.cfg, "bins", "4") == CDD_OK);
        CHECK(cdd_config_set(fx.cfg, "min_count", "1") == CDD_OK);
        CHECK(cdd_config_set(fx.cfg, "seed", "11") == CDD_OK);
        CHECK(cdd_config_set(fx.cfg, "fallback", "expected-negative") == CDD_OK);
        CHECK(cdd_config_set(fx.cfg, "threads", "2") == CDD_OK);
    }
    SUBCASE("invalid overrides name the key") {
        CHECK(cdd_config_set(fx.cfg, "k", "zero") == CDD_ERR_RUN);
        CHECK(std::string(cdd_last_error()).find("'k'") != std::string::npos);
        CHECK(cdd_config_set(fx.cfg, "k", "0") == CDD_ERR_RUN);
        CHECK(std::string(cdd_last_error()).find(">= 1") != std::string::npos);
        CHECK(cdd_config_set(fx.cfg, "verbosity", "3") == CDD_ERR_RUN);
        CHECK(std::string(cdd_last_error()).find("verbosity") != std::string::npos);
        CHECK(cdd_config_set(fx.cfg, "fallback", "nah") == CDD_ERR_RUN);
    }
}

TEST_CASE("dataset loading, counting, and echo") {
    Fixture fx;
    CHECK(cdd_dataset_size(fx.raw) == 80);
    CHECK(cdd_dataset_count(fx.raw, -1, -1) == 80);
    CHECK(cdd_dataset_count(fx.raw, CDD_GROUP_PROTECTED, -1) == 40);
    CHECK(cdd_dataset_count(fx.raw, CDD_GROUP_UNPROTECTED, -1) == 40);
    CHECK(cdd_dataset_count(fx.raw, CDD_GROUP_PROTECTED, CDD_DECISION_NEGATIVE) == 28);
    CHECK(cdd_dataset_count(fx.raw, CDD_GROUP_UNPROTECTED, CDD_DECISION_POSITIVE) == 16);

    double p_neg = 0.0, p_pos = 0.0;
    REQUIRE(cdd_dataset_base_rates(fx.raw, &p_neg, &p_pos) == CDD_OK);
    CHECK(p_neg == doctest::Approx(52.0 / 80.0));
    CHECK(p_pos == doctest::Approx(28.0 / 80.0));

    const std::string out = fx.scratch.file("echo.csv");
    REQUIRE(cdd_dataset_write(fx.raw, out.c_str()) == CDD_OK);
    CHECK(slurp(out) == fixture_csv()); // loads byte-identically back out

    SUBCASE("a config pointing at a broken file reports the position") {
        fx.scratch.write("bad.csv", "age,job,sex,outcome\nx,office,F,yes\n");
        cdd_config* cfg = nullptr;
        std::string json = fixture_config(false);
        json.replace(json.find("t.csv"), 5, "bad.csv");
        REQUIRE(cdd_config_parse(json.c_str(), fx.scratch.dir().c_str(), &cfg) == CDD_OK);
        cdd_dataset* ds = nullptr;
        CHECK(cdd_dataset_load(cfg, &ds) == CDD_ERR_RUN);
        CHECK(ds == nullptr);
        CHECK(std::string(cdd_last_error()).find("line 2") != std::string::npos);
        cdd_config_free(cfg);
    }
}

TEST_CASE("model fitting requires normalization") {
    Fixture fx;
    cdd_model* model = nullptr;
    CHECK(cdd_model_fit(fx.cfg, fx.raw, &model) == CDD_ERR_RUN);
    CHECK(model == nullptr);
    CHECK(std::string(cdd_last_error()).find("cdd_dataset_normalize") != std::string::npos);
    REQUIRE(cdd_model_fit(fx.cfg, fx.norm, &model) == CDD_OK);

    int32_t iters = -1, converged = -1;
    double final_ll = 0.0;
    REQUIRE(cdd_model_meta(model, &iters, &final_ll, &converged) == CDD_OK);
    CHECK(iters >= 1);
    CHECK(final_ll < 0.0);
    CHECK((converged == 0 || converged == 1));

    for (const int64_t id : {0, 1, 40, 79}) {
        double e = -1.0;
        REQUIRE(cdd_model_propensity(model, fx.norm, id, &e) == CDD_OK);
        CHECK(e >= 0.01);
        CHECK(e <= 0.99);
    }
    double e = 0.0;
    CHECK(cdd_model_propensity(model, fx.norm, 80, &e) == CDD_ERR_RUN);

    SUBCASE("save and reopen preserve scoring; selection stays behind") {
        const std::string mpath = fx.scratch.file("model.json");
        REQUIRE(cdd_model_save(model, mpath.c_str()) == CDD_OK);
        cdd_model* back = nullptr;
        REQUIRE(cdd_model_open(mpath.c_str(), &back) == CDD_OK);
        for (const int64_t id : {0, 7, 33}) {
            double a = 0.0, b = 0.0;
            REQUIRE(cdd_model_propensity(model, fx.norm, id, &a) == CDD_OK);
            REQUIRE(cdd_model_propensity(back, fx.norm, id, &b) == CDD_OK);
            CHECK(a == b);
        }
        const std::string spath = fx.scratch.file("selection.csv");
        REQUIRE(cdd_model_write_selection(model, spath.c_str()) == CDD_OK);
        CHECK(slurp(spath).rfind("attr,ig_group,ig_decision,status", 0) == 0);
        CHECK(cdd_model_write_selection(back, spath.c_str()) == CDD_ERR_RUN);
        CHECK(std::string(cdd_last_error()).find("reopened") != std::string::npos);
        cdd_model_free(back);
    }
    cdd_model_free(model);
}

TEST_CASE("scores, trends, trees") {
    Fixture fx;
    cdd_model* model = nullptr;
    REQUIRE(cdd_model_fit(fx.cfg, fx.norm, &model) == CDD_OK);
    cdd_scores* scores = nullptr;
    REQUIRE(cdd_scores_compute(fx.cfg, fx.norm, model, &scores) == CDD_OK);
    REQUIRE(cdd_scores_count(scores) == 80);

    SUBCASE("rows carry consistent fields") {
        cdd_score_row row;
        REQUIRE(cdd_scores_get(scores, 0, &row) == CDD_OK);
        CHECK(row.id == 0);
        CHECK(row.group == CDD_GROUP_PROTECTED);    // id 0 is F
        CHECK(row.decision == CDD_DECISION_NEGATIVE); // office but 0 % 4 == 0
        for (int64_t i = 0; i < 80; ++i) {
            REQUIRE(cdd_scores_get(scores, i, &row) == CDD_OK);
            CHECK(row.id == i);
            const double expect =
                row.group == CDD_GROUP_PROTECTED ? row.rd_causal : -row.rd_causal;
            CHECK(row.disadvantage == expect);
            CHECK((row.flag == CDD_FLAG_NEITHER || row.flag == CDD_FLAG_DISCRIMINATED ||
                   row.flag == CDD_FLAG_FAVORED));
            if (row.flag == CDD_FLAG_DISCRIMINATED) CHECK(row.decision == CDD_DECISION_NEGATIVE);
            if (row.flag == CDD_FLAG_FAVORED) CHECK(row.decision == CDD_DECISION_POSITIVE);
        }
        CHECK(cdd_scores_get(scores, 80, &row) == CDD_ERR_RUN);
        CHECK(std::string(cdd_last_error()).find("out of range") != std::string::npos);
    }
    SUBCASE("score and trend tables") {
        const std::string spath = fx.scratch.file("scores.csv");
        REQUIRE(cdd_scores_write(scores, spath.c_str()) == CDD_OK);
        const std::string text = slurp(spath);
        CHECK(text.rfind("id,group,decision,propensity,rd,rd_causal,disadvantage,flag", 0) == 0);
        CHECK(std::count(text.begin(), text.end(), '\n') == 81);

        const std::string tpath = fx.scratch.file("trends.csv");
        REQUIRE(cdd_trends_write(fx.cfg, scores, "everyone", tpath.c_str()) == CDD_OK);
        CHECK(slurp(tpath).rfind("bin_lo,bin_hi,filter,n,", 0) == 0);
        CHECK(cdd_trends_write(fx.cfg, scores, "somebody", tpath.c_str()) == CDD_ERR_RUN);
        CHECK(std::string(cdd_last_error()).find("somebody") != std::string::npos);
    }
    SUBCASE("trees in both modes") {
        for (const char* mode : {"discrimination", "favoritism"}) {
            cdd_tree* tree = nullptr;
            REQUIRE(cdd_tree_learn(fx.cfg, fx.norm, scores, mode, &tree) == CDD_OK);
            const std::string tj = fx.scratch.file(std::string("tree_") + mode + ".json");
            const std::string rj = fx.scratch.file(std::string("rules_") + mode + ".json");
            const std::string cc = fx.scratch.file(std::string("cmp_") + mode + ".csv");
            REQUIRE(cdd_tree_write_json(tree, tj.c_str()) == CDD_OK);
            REQUIRE(cdd_tree_write_rules(tree, rj.c_str()) == CDD_OK);
            REQUIRE(cdd_tree_write_compare(tree, fx.norm, scores, cc.c_str()) == CDD_OK);
            CHECK(slurp(tj).find("\"leaf\"") != std::string::npos);
            CHECK(slurp(rj).rfind("[", 0) == 0);
            CHECK(slurp(cc).rfind("rule_index,predicted_rdc,", 0) == 0);
            cdd_tree_free(tree);
        }
        cdd_tree* tree = nullptr;
        CHECK(cdd_tree_learn(fx.cfg, fx.norm, scores, "both", &tree) == CDD_ERR_RUN);
        CHECK(std::string(cdd_last_error()).find("both") != std::string::npos);
    }
    SUBCASE("tree learning reports an undersized label set") {
        Fixture big(false, 4000);
        cdd_model* m2 = nullptr;
        REQUIRE(cdd_model_fit(big.cfg, big.norm, &m2) == CDD_OK);
        cdd_scores* s2 = nullptr;
        REQUIRE(cdd_scores_compute(big.cfg, big.norm, m2, &s2) == CDD_OK);
        cdd_tree* tree = nullptr;
        CHECK(cdd_tree_learn(big.cfg, big.norm, s2, "discrimination", &tree) == CDD_ERR_RUN);
        CHECK(std::string(cdd_last_error()).find("min_leaf") != std::string::npos);
        cdd_scores_free(s2);
        cdd_model_free(m2);
    }
    cdd_scores_free(scores);
    cdd_model_free(model);
}

TEST_CASE("tamper through the C API") {
    SUBCASE("a config without a tamper block refuses to run") {
        Fixture fx(false);
        cdd_dataset* tampered = nullptr;
        CHECK(cdd_tamper_run(fx.cfg, fx.raw, &tampered, nullptr, nullptr, nullptr) ==
              CDD_ERR_RUN);
        CHECK(std::string(cdd_last_error()).find("tamper") != std::string::npos);
    }
    SUBCASE("flip counts reconcile with the decision totals") {
        Fixture fx(true);
        cdd_dataset* tampered = nullptr;
        int64_t* ids = nullptr;
        size_t flipped = 0;
        int64_t matched = 0;
        REQUIRE(cdd_tamper_run(fx.cfg, fx.raw, &tampered, &ids, &flipped, &matched) == CDD_OK);
        CHECK(cdd_dataset_size(tampered) == 80);
        CHECK(matched == 28); // every positive in the fixture is an office record
        CHECK(flipped <= static_cast<size_t>(matched));
        CHECK(flipped > 0);
        for (size_t i = 1; i < flipped; ++i) CHECK(ids[i - 1] < ids[i]);
        const int64_t pos_before = cdd_dataset_count(fx.raw, -1, CDD_DECISION_POSITIVE);
        const int64_t pos_after = cdd_dataset_count(tampered, -1, CDD_DECISION_POSITIVE);
        CHECK(pos_before - pos_after == static_cast<int64_t>(flipped));
        // second run draws the same stream
        cdd_dataset* again = nullptr;
        size_t flipped2 = 0;
        REQUIRE(cdd_tamper_run(fx.cfg, fx.raw, &again, nullptr, &flipped2, nullptr) == CDD_OK);
        CHECK(flipped2 == flipped);
        cdd_dataset_free(again);
        cdd_ids_free(ids);
        cdd_dataset_free(tampered);
    }
}

TEST_CASE("pipeline end to end") {
    Fixture fx(true);
    const std::string out = fx.scratch.file("out");
    REQUIRE(cdd_pipeline_run(fx.cfg, out.c_str()) == CDD_OK);
    for (const char* name :
         {"manifest.json", "scores.csv", "selection.csv", "model.json", "tampered.csv",
          "scores_tampered.csv", "trends_everyone.csv", "trends_discriminated.csv"})
        CHECK(fs::exists(fs::path(out) / name));
    const std::string manifest = slurp((fs::path(out) / "manifest.json").string());
    CHECK(manifest.find("\"fnv1a64\"") != std::string::npos);
    CHECK(manifest.find("\"artifacts\"") != std::string::npos);
}

// SPDX-License-Identifier: Apache-2.0
#include <catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "support/synthetic.hpp"
#include "xmc/xmc.hpp"

using namespace xmc;
namespace fs = std::filesystem;

namespace {

struct fixture {
    fs::path root;
    std::string train, test, label_texts, words;

    fixture(const std::string& name, const synthetic::corpus_spec& spec)
        : root(fs::temp_directory_path() / name) {
        fs::remove_all(root);
        fs::create_directories(root);
        auto c = synthetic::make_corpus(spec);
        train = (root / "train.txt").string();
        test = (root / "test.txt").string();
        save_dataset(train, c.train);
        save_dataset(test, c.test);
        label_texts = (root / "labels.txt").string();
        std::ofstream(label_texts) << [&] {
            std::string s;
            for (const auto& t : c.label_texts) s += t + "\n";
            return s;
        }();
        words = (root / "words.txt").string();
        std::ofstream(words) << synthetic::word_table_text(spec);
    }
    ~fixture() { fs::remove_all(root); }

    std::string dir(const std::string& name) const { return (root / name).string(); }
};

const fixture& data() {
    static fixture f("xmc_pipeline_test", synthetic::corpus_spec{});
    return f;
}

/// Label-specific words are rare and topic words dominate, so retrieving
/// the right topic cluster matters.
const fixture& hard_data() {
    static fixture f("xmc_pipeline_hard", [] {
        synthetic::corpus_spec s;
        s.label_share = 0.05;
        s.topic_share = 0.5;
        s.min_doc_len = 15;
        s.max_doc_len = 30;
        return s;
    }());
    return f;
}

pipeline_config hard_config() {
    pipeline_config c;
    c.K = 8;
    c.beam = 1;
    c.seed = 3;
    return c;
}

pipeline_config small_config() {
    pipeline_config c;
    c.K = 8;
    c.seed = 3;
    return c;
}

std::string slurp(const std::string& path) { return detail::read_file(path); }

nlohmann::json manifest_of(const pipeline_result& r) { return nlohmann::json::parse(slurp(r.manifest_path)); }

int run_cli(const std::string& args) {
    const char* cli = std::getenv("XMC_CLI");
    std::string cmd = std::string(cli) + " " + args + " > /dev/null 2>&1";
    int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

} // namespace

TEST_CASE("pipeline runs end to end and is deterministic", "[pipeline]") {
    const auto& f = data();
    auto a = run_pipeline(small_config(), f.train, f.test, f.dir("run_a"));
    auto b = run_pipeline(small_config(), f.train, f.test, f.dir("run_b"));
    CHECK(a.report.precision == b.report.precision);
    CHECK(a.report.recall == b.report.recall);
    CHECK(slurp(f.dir("run_a") + "/test.pred") == slurp(f.dir("run_b") + "/test.pred"));
    CHECK(manifest_of(a) == manifest_of(b));
    REQUIRE(a.valid_report);
    CHECK(a.report.instance_count == 200);
    CHECK(a.report.p_at(1) > 0.5);
    for (auto name : {"vocab.tsv", "X_train.smat", "member_0_pifa/clusters.txt", "member_0_pifa/matcher.model",
                      "member_0_pifa/ranker/manifest.txt", "member_0_pifa/test.scores", "report.kv", "manifest.json"})
        CHECK(fs::exists(fs::path(f.dir("run_a")) / name));
}

TEST_CASE("manifest hashes track config and inputs", "[pipeline]") {
    const auto& f = data();
    auto base = manifest_of(run_pipeline(small_config(), f.train, f.test, f.dir("m_base")));
    auto cfg = small_config();
    cfg.seed = 4;
    auto reseeded = manifest_of(run_pipeline(cfg, f.train, f.test, f.dir("m_seed")));
    CHECK(reseeded["config"] != base["config"]);
    CHECK(reseeded["inputs"] == base["inputs"]);

    auto edited = f.dir("train_edited.txt");
    fs::copy_file(f.train, edited, fs::copy_options::overwrite_existing);
    std::ofstream(edited, std::ios::app) << "0\textra document\n";
    auto changed = manifest_of(run_pipeline(small_config(), edited, f.test, f.dir("m_input")));
    CHECK(changed["inputs"]["train"]["hash"] != base["inputs"]["train"]["hash"]);
    CHECK(changed["inputs"]["test"] == base["inputs"]["test"]);
    CHECK(changed["config"] == base["config"]);
}

TEST_CASE("reloaded artifacts and imported scores reproduce predictions", "[pipeline]") {
    const auto& f = data();
    auto out = f.dir("reload");
    auto r = run_pipeline(small_config(), f.train, f.test, out);
    const std::string m = out + "/member_0_pifa/";
    auto X = load_sparse_matrix(out + "/X_test.smat");
    auto matcher = load_matcher(m + "matcher.model");
    auto ranker = load_ranker(m + "ranker");
    auto reloaded = predict_all(match_all(matcher, X, default_beam), ranker, X, default_top_k);
    CHECK(reloaded == r.members[0].test_predictions);

    auto imported = predict_all(import_scores(m + "test.scores", 8), ranker, X, default_top_k);
    save_predictions(out + "/imported.pred", imported);
    CHECK(slurp(out + "/imported.pred") == slurp(m + "test.pred"));
}

TEST_CASE("PIFA indexing beats random indexing", "[pipeline]") {
    const auto& f = hard_data();
    auto pifa = run_pipeline(hard_config(), f.train, f.test, f.dir("pifa"));
    auto cfg = hard_config();
    cfg.members = {embedding_kind::random};
    auto random = run_pipeline(cfg, f.train, f.test, f.dir("random"));
    CHECK(pifa.report.p_at(1) >= random.report.p_at(1) + 0.03);
}

TEST_CASE("ensemble of PIFA and TEXT members", "[pipeline]") {
    const auto& f = hard_data();
    auto cfg = hard_config();
    cfg.members = {embedding_kind::pifa, embedding_kind::text};
    cfg.word_embeddings = f.words;
    cfg.label_texts = f.label_texts;
    auto r = run_pipeline(cfg, f.train, f.test, f.dir("ens"));
    REQUIRE(r.members.size() == 2);
    CHECK(r.predictions == ensemble({r.members[0].test_predictions, r.members[1].test_predictions}, cfg.top_k));
    CHECK(r.report.p_at(1) == evaluate(r.predictions, load_sparse_matrix(f.dir("ens") + "/Y_test.smat")).p_at(1));
    CHECK(fs::exists(f.dir("ens") + "/member_1_text/test.pred"));
}

TEST_CASE("pipeline errors name the failing stage", "[pipeline]") {
    const auto& f = data();
    auto bad = f.dir("bad_test.txt");
    std::ofstream(bad) << "1\tfine\nnot a valid line\n";
    try {
        run_pipeline(small_config(), f.train, bad, f.dir("bad"));
        FAIL("expected a stage error");
    } catch (const error& e) {
        CHECK(std::string(e.what()).find("stage 'load'") != std::string::npos);
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    auto cfg = small_config();
    cfg.K = 6;
    CHECK_THROWS_AS(run_pipeline(cfg, f.train, f.test, f.dir("bad")), error);
    cfg = small_config();
    cfg.members = {embedding_kind::text};
    CHECK_THROWS_AS(run_pipeline(cfg, f.train, f.test, f.dir("bad")), error);
}

TEST_CASE("command-line verbs", "[pipeline][cli]") {
    if (!std::getenv("XMC_CLI")) SKIP("XMC_CLI not set");
    const auto& f = data();
    const std::string d = f.dir("cli");
    fs::create_directories(d);
    CHECK(run_cli("featurize --input " + f.train + " --vocab " + d + "/vocab.tsv --fit --x-out " + d +
                  "/X.smat --y-out " + d + "/Y.smat") == 0);
    CHECK(run_cli("featurize --input " + f.test + " --vocab " + d + "/vocab.tsv --num-labels 64 --x-out " + d +
                  "/Xt.smat --y-out " + d + "/Yt.smat") == 0);
    CHECK(run_cli("embed --embedding pifa --x " + d + "/X.smat --y " + d + "/Y.smat --out " + d + "/pifa.emb") == 0);
    CHECK(run_cli("index --emb " + d + "/pifa.emb --k 6 --out " + d + "/clusters.txt") == 0);
    CHECK(load_cluster_assignment(d + "/clusters.txt").K == 8);
    CHECK(run_cli("train-matcher --x " + d + "/X.smat --y " + d + "/Y.smat --clusters " + d + "/clusters.txt --out " +
                  d + "/matcher.model") == 0);
    CHECK(run_cli("train-ranker --x " + d + "/X.smat --y " + d + "/Y.smat --clusters " + d + "/clusters.txt --out " +
                  d + "/ranker") == 0);
    CHECK(run_cli("predict --x " + d + "/Xt.smat --matcher " + d + "/matcher.model --ranker " + d +
                  "/ranker --export-scores " + d + "/t.scores --out " + d + "/a.pred") == 0);
    CHECK(run_cli("import-scores --scores " + d + "/t.scores --clusters " + d + "/clusters.txt") == 0);
    CHECK(run_cli("predict --x " + d + "/Xt.smat --scores " + d + "/t.scores --ranker " + d + "/ranker --out " + d +
                  "/b.pred") == 0);
    CHECK(slurp(d + "/a.pred") == slurp(d + "/b.pred"));
    CHECK(run_cli("ensemble --ensemble " + d + "/a.pred," + d + "/b.pred --out " + d + "/e.pred") == 0);
    CHECK(slurp(d + "/a.pred") == slurp(d + "/e.pred"));
    CHECK(run_cli("evaluate --pred " + d + "/e.pred --y " + d + "/Yt.smat --out " + d + "/report.kv") == 0);
    CHECK(slurp(d + "/report.kv").find("p@1=") != std::string::npos);
    CHECK(run_cli("run --train " + f.train + " --test " + f.test + " --out-dir " + d + "/run --k 8") == 0);
    CHECK(fs::exists(d + "/run/manifest.json"));

    // usage and library errors
    CHECK(run_cli("evaluate --pred " + d + "/e.pred") == 2);
    CHECK(run_cli("index --emb " + d + "/pifa.emb --k 128 --out " + d + "/c2.txt") == 1);
    std::ofstream(d + "/bad.scores") << "0 9:0.5\n";
    CHECK(run_cli("import-scores --scores " + d + "/bad.scores --k 8") == 1);
}

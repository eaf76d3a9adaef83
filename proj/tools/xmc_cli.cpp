// SPDX-License-Identifier: Apache-2.0
// Command-line front end: one verb per pipeline stage plus `run` for the
// whole pipeline. Exit status is 0 on success, 1 on a library error and 2
// on bad usage.
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "xmc/xmc.hpp"

namespace {

using namespace xmc;

std::vector<std::size_t> parse_ks(const std::string& s) {
    std::vector<std::size_t> ks;
    std::stringstream in(s);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        std::size_t k = 0;
        if (!detail::parse_int(tok, k) || k == 0) throw error(errc::bad_input, "bad k list '" + s + "'");
        ks.push_back(k);
    }
    if (ks.empty()) throw error(errc::bad_input, "empty k list");
    return ks;
}

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream in(s);
    std::string tok;
    while (std::getline(in, tok, ','))
        if (!tok.empty()) out.push_back(tok);
    return out;
}

/// K is rounded up to a power of two; the adjustment is reported.
std::size_t effective_k(std::size_t requested) {
    if (requested == 0) throw error(errc::bad_k, "K must be positive");
    std::size_t k = round_up_power_of_two(requested);
    if (k != requested) std::cerr << "xmc: K=" << requested << " rounded up to " << k << '\n';
    return k;
}

void print_report(const metric_report& r, const std::string& kv_out) {
    write_report_text(std::cout, r);
    if (!kv_out.empty()) {
        auto out = detail::open_out(kv_out);
        write_report_kv(out, r);
    }
}

struct options {
    // shared
    std::size_t k = 64;
    std::uint64_t seed = 0;
    std::string embedding = "pifa";
    double c = 1.0;
    std::size_t beam = default_beam;
    std::size_t topk = default_top_k;
    std::size_t min_df = 1;
    std::string ranker = "linear";
    std::size_t random_dim = 64;
    std::string ks = "1,3,5";
    std::size_t max_iters = 1000;
    double tol = 1e-4;
    double weight_threshold = default_weight_threshold;

    // paths
    std::string input, text, labels, vocab, x, y, x_out, y_out, emb, clusters, matcher, ranker_dir, scores,
        export_scores_path, out, pred, word_emb, label_texts, label_map, train, test, out_dir, ensemble;
    bool fit = false;
    std::size_t num_labels = 0;
    double valid_fraction = 0.1;
};

solver_options solver_from(const options& o, std::uint64_t seed) {
    solver_options s;
    s.C = o.c;
    s.max_iters = o.max_iters;
    s.tol = o.tol;
    s.seed = seed;
    s.weight_threshold = o.weight_threshold;
    return s;
}

void add_solver_flags(CLI::App* cmd, options& o) {
    cmd->add_option("--c", o.c, "Loss penalty C")->capture_default_str();
    cmd->add_option("--max-iters", o.max_iters, "Solver pass limit")->capture_default_str();
    cmd->add_option("--tol", o.tol, "Solver projected-gradient tolerance")->capture_default_str();
    cmd->add_option("--weight-threshold", o.weight_threshold, "Drop stored weights below this magnitude")
        ->capture_default_str();
    cmd->add_option("--seed", o.seed, "Random seed")->capture_default_str();
}

void cmd_featurize(const options& o) {
    auto d = o.num_labels ? load_dataset(o.input, split_tag::train, o.num_labels) : load_dataset(o.input);
    std::vector<token_sequence> tokens;
    tokens.reserve(d.size());
    for (const auto& doc : d.docs) tokens.push_back(tokenize(doc));
    vocabulary v;
    if (o.fit) {
        v = build_vocab(tokens, o.min_df);
        save_vocabulary(o.vocab, v);
    } else {
        v = load_vocabulary(o.vocab);
    }
    std::size_t empty = 0;
    auto X = tfidf_matrix(tokens, v, &empty);
    save_sparse_matrix(o.x_out, X);
    save_sparse_matrix(o.y_out, d.label_matrix());
    std::cerr << "xmc: " << X.rows() << " instances, " << v.size() << " features, " << d.num_labels << " labels";
    if (empty) std::cerr << ", " << empty << " empty documents";
    std::cerr << '\n';
}

void cmd_embed(const options& o) {
    auto kind = parse_embedding_kind(o.embedding);
    label_embeddings emb = [&] {
        switch (kind) {
        case embedding_kind::pifa: return pifa_embed(load_sparse_matrix(o.y), load_sparse_matrix(o.x));
        case embedding_kind::text: return text_embed(load_label_texts(o.label_texts), load_word_embeddings(o.word_emb));
        case embedding_kind::random: {
            std::size_t L = o.num_labels ? o.num_labels : load_sparse_matrix(o.y).cols();
            return random_embed(L, o.random_dim, o.seed);
        }
        }
        throw error(errc::bad_input, "unknown embedding kind");
    }();
    save_label_embeddings(o.out, emb);
    std::cerr << "xmc: " << emb.size() << " label embeddings (" << to_string(kind) << "), " << emb.empty_labels().size()
              << " empty\n";
}

void cmd_index(const options& o) {
    auto emb = load_label_embeddings(o.emb);
    auto a = build_index(emb, effective_k(o.k), o.seed);
    save_cluster_assignment(o.out, a);
    std::size_t lo = emb.size(), hi = 0;
    for (const auto& c : a.cluster_to_labels) {
        lo = std::min(lo, c.size());
        hi = std::max(hi, c.size());
    }
    std::cerr << "xmc: " << emb.size() << " labels in " << a.K << " clusters, sizes " << lo << ".." << hi << '\n';
}

void cmd_train_matcher(const options& o) {
    auto X = load_sparse_matrix(o.x);
    auto a = load_cluster_assignment(o.clusters);
    auto m = train_matcher(X, build_targets(load_sparse_matrix(o.y), a), solver_from(o, o.seed));
    for (const auto& w : m.warnings) std::cerr << "xmc: warning: " << w << '\n';
    save_matcher(o.out, m);
}

void cmd_train_ranker(const options& o) {
    auto X = load_sparse_matrix(o.x);
    auto Y = load_sparse_matrix(o.y);
    auto a = load_cluster_assignment(o.clusters);
    ranker_model r = parse_ranker_kind(o.ranker) == ranker_kind::tfidf
                         ? make_tfidf_ranker(o.emb.empty() ? pifa_embed(Y, X) : load_label_embeddings(o.emb), a)
                         : train_ranker(X, Y, a, solver_from(o, o.seed));
    for (const auto& w : r.warnings) std::cerr << "xmc: warning: " << w << '\n';
    save_ranker(o.out, r);
}

void cmd_predict(const options& o) {
    auto X = load_sparse_matrix(o.x);
    auto r = load_ranker(o.ranker_dir);
    std::vector<ranked_list> matched;
    if (!o.scores.empty()) {
        matched = import_scores(o.scores, r.clusters.K);
    } else {
        if (o.matcher.empty()) throw error(errc::bad_input, "predict needs --matcher or --scores");
        matched = match_all(load_matcher(o.matcher), X, o.beam);
    }
    if (!o.export_scores_path.empty()) export_scores(o.export_scores_path, matched);
    save_predictions(o.out, predict_all(matched, r, X, o.topk));
}

void cmd_evaluate(const options& o) {
    print_report(evaluate(load_predictions(o.pred), load_sparse_matrix(o.y), parse_ks(o.ks)), o.out);
}

void cmd_ensemble(const options& o) {
    auto files = split_commas(o.ensemble);
    if (files.empty()) throw error(errc::bad_input, "--ensemble needs at least one prediction file");
    std::vector<std::vector<ranked_list>> models;
    for (const auto& f : files) models.push_back(load_predictions(f));
    save_predictions(o.out, ensemble(models, o.topk));
}

void cmd_import_scores(const options& o) {
    std::size_t K = o.k;
    if (!o.clusters.empty()) K = load_cluster_assignment(o.clusters).K;
    auto lists = import_scores(o.scores, K);
    std::size_t entries = 0;
    for (const auto& l : lists) entries += l.size();
    std::cerr << "xmc: " << lists.size() << " instances, " << entries << " cluster scores, K=" << K << '\n';
    if (!o.out.empty()) export_scores(o.out, lists);
}

void cmd_convert(const options& o) {
    std::vector<std::string> names;
    if (!o.label_map.empty() && std::filesystem::exists(o.label_map)) names = load_label_texts(o.label_map);
    std::size_t known = names.size();
    auto d = load_named_dataset(o.text, o.labels, names);
    save_dataset(o.out, d);
    if (!o.label_map.empty()) {
        auto out = detail::open_out(o.label_map);
        for (const auto& n : names) out << n << '\n';
    }
    std::cerr << "xmc: " << d.size() << " instances, " << names.size() << " labels (" << names.size() - known
              << " new)\n";
}

void cmd_run(const options& o) {
    pipeline_config cfg;
    cfg.K = effective_k(o.k);
    cfg.seed = o.seed;
    cfg.members.clear();
    for (const auto& m : split_commas(o.embedding)) cfg.members.push_back(parse_embedding_kind(m));
    cfg.C = o.c;
    cfg.beam = o.beam;
    cfg.top_k = o.topk;
    cfg.min_df = o.min_df;
    cfg.ranker = parse_ranker_kind(o.ranker);
    cfg.random_dim = o.random_dim;
    cfg.valid_fraction = o.valid_fraction;
    cfg.ks = parse_ks(o.ks);
    cfg.word_embeddings = o.word_emb;
    cfg.label_texts = o.label_texts;
    cfg.solver.max_iters = o.max_iters;
    cfg.solver.tol = o.tol;
    cfg.weight_threshold = o.weight_threshold;
    auto result = run_pipeline(cfg, o.train, o.test, o.out_dir, &std::cerr);
    for (const auto& m : result.members)
        for (const auto& w : m.warnings) std::cerr << "xmc: warning: " << w << '\n';
    if (result.valid_report) {
        std::cout << "validation\n";
        write_report_text(std::cout, *result.valid_report);
        std::cout << "test\n";
    }
    write_report_text(std::cout, result.report);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Extreme multi-label classification: index labels, match clusters, rank labels"};
    app.require_subcommand(1);
    options o;

    auto* featurize = app.add_subcommand("featurize", "Tokenize a dataset and write TF-IDF features and labels");
    featurize->add_option("--input", o.input, "Combined 'labels<TAB>text' file")->required()->check(CLI::ExistingFile);
    featurize->add_option("--vocab", o.vocab, "Vocabulary file (written with --fit, read otherwise)")->required();
    featurize->add_flag("--fit", o.fit, "Build the vocabulary from this input");
    featurize->add_option("--min-df", o.min_df, "Minimum document frequency")->capture_default_str();
    featurize->add_option("--num-labels", o.num_labels, "Label space size (defaults to max id + 1)");
    featurize->add_option("--x-out", o.x_out, "Feature matrix output")->required();
    featurize->add_option("--y-out", o.y_out, "Label matrix output")->required();

    auto* embed = app.add_subcommand("embed", "Compute label embeddings");
    embed->add_option("--embedding", o.embedding, "pifa, text or random")->capture_default_str();
    embed->add_option("--x", o.x, "Training features (pifa)");
    embed->add_option("--y", o.y, "Training labels (pifa, random)");
    embed->add_option("--label-texts", o.label_texts, "One description per label (text)");
    embed->add_option("--word-emb", o.word_emb, "Word embedding table (text)");
    embed->add_option("--num-labels", o.num_labels, "Label count (random)");
    embed->add_option("--dim", o.random_dim, "Dimension (random)")->capture_default_str();
    embed->add_option("--seed", o.seed, "Random seed")->capture_default_str();
    embed->add_option("--out", o.out, "Embedding output")->required();

    auto* index = app.add_subcommand("index", "Cluster labels by recursive balanced 2-means");
    index->add_option("--emb", o.emb, "Label embeddings")->required()->check(CLI::ExistingFile);
    index->add_option("--k", o.k, "Number of clusters (rounded up to a power of two)")->capture_default_str();
    index->add_option("--seed", o.seed, "Random seed")->capture_default_str();
    index->add_option("--out", o.out, "Cluster assignment output")->required();

    auto* tm = app.add_subcommand("train-matcher", "Train one-vs-all cluster classifiers");
    tm->add_option("--x", o.x, "Training features")->required()->check(CLI::ExistingFile);
    tm->add_option("--y", o.y, "Training labels")->required()->check(CLI::ExistingFile);
    tm->add_option("--clusters", o.clusters, "Cluster assignment")->required()->check(CLI::ExistingFile);
    tm->add_option("--out", o.out, "Matcher model output")->required();
    add_solver_flags(tm, o);

    auto* tr = app.add_subcommand("train-ranker", "Train within-cluster label rankers");
    tr->add_option("--x", o.x, "Training features")->required()->check(CLI::ExistingFile);
    tr->add_option("--y", o.y, "Training labels")->required()->check(CLI::ExistingFile);
    tr->add_option("--clusters", o.clusters, "Cluster assignment")->required()->check(CLI::ExistingFile);
    tr->add_option("--ranker", o.ranker, "linear or tfidf")->capture_default_str();
    tr->add_option("--emb", o.emb, "PIFA embeddings for the tfidf ranker (computed if absent)");
    tr->add_option("--out", o.out, "Ranker directory")->required();
    add_solver_flags(tr, o);

    auto* pr = app.add_subcommand("predict", "Match clusters and rank labels");
    pr->add_option("--x", o.x, "Features to score")->required()->check(CLI::ExistingFile);
    pr->add_option("--matcher", o.matcher, "Matcher model");
    pr->add_option("--scores", o.scores, "Externally computed cluster scores instead of a matcher");
    pr->add_option("--ranker", o.ranker_dir, "Ranker directory")->required();
    pr->add_option("--beam", o.beam, "Clusters kept per instance")->capture_default_str();
    pr->add_option("--topk", o.topk, "Labels kept per instance")->capture_default_str();
    pr->add_option("--export-scores", o.export_scores_path, "Write the matcher scores used");
    pr->add_option("--out", o.out, "Prediction output")->required();

    auto* ev = app.add_subcommand("evaluate", "Precision and recall at k");
    ev->add_option("--pred", o.pred, "Prediction file")->required()->check(CLI::ExistingFile);
    ev->add_option("--y", o.y, "Ground-truth label matrix")->required()->check(CLI::ExistingFile);
    ev->add_option("--ks", o.ks, "Comma-separated cutoffs")->capture_default_str();
    ev->add_option("--out", o.out, "Also write key=value report here");

    auto* en = app.add_subcommand("ensemble", "Average prediction files");
    en->add_option("--ensemble", o.ensemble, "Comma-separated prediction files")->required();
    en->add_option("--topk", o.topk, "Labels kept per instance")->capture_default_str();
    en->add_option("--out", o.out, "Prediction output")->required();

    auto* is = app.add_subcommand("import-scores", "Validate an external cluster score file");
    is->add_option("--scores", o.scores, "Score file")->required()->check(CLI::ExistingFile);
    auto* k_opt = is->add_option("--k", o.k, "Number of clusters");
    is->add_option("--clusters", o.clusters, "Cluster assignment giving K")->excludes(k_opt);
    is->add_option("--out", o.out, "Write the validated scores in canonical form");

    auto* cv = app.add_subcommand("convert", "Convert text + label-name files to the combined format");
    cv->add_option("--text", o.text, "One document per line")->required()->check(CLI::ExistingFile);
    cv->add_option("--labels", o.labels, "Whitespace-separated label names per line")->required()->check(CLI::ExistingFile);
    cv->add_option("--label-map", o.label_map, "Label name list, extended in place (reuse for the test split)");
    cv->add_option("--out", o.out, "Combined output")->required();

    auto* run = app.add_subcommand("run", "Whole pipeline: train, predict, evaluate, ensemble");
    run->add_option("--train", o.train, "Training file")->required()->check(CLI::ExistingFile);
    run->add_option("--test", o.test, "Test file")->required()->check(CLI::ExistingFile);
    run->add_option("--out-dir", o.out_dir, "Artifact directory")->required();
    run->add_option("--k", o.k, "Number of clusters (rounded up to a power of two)")->capture_default_str();
    run->add_option("--embedding", o.embedding, "Comma-separated members: pifa, text, random")->capture_default_str();
    run->add_option("--ranker", o.ranker, "linear or tfidf")->capture_default_str();
    run->add_option("--beam", o.beam, "Clusters kept per instance")->capture_default_str();
    run->add_option("--topk", o.topk, "Labels kept per instance")->capture_default_str();
    run->add_option("--min-df", o.min_df, "Minimum document frequency")->capture_default_str();
    run->add_option("--dim", o.random_dim, "Random embedding dimension")->capture_default_str();
    run->add_option("--valid-fraction", o.valid_fraction, "Held-out share of the training file")->capture_default_str();
    run->add_option("--ks", o.ks, "Comma-separated cutoffs")->capture_default_str();
    run->add_option("--word-emb", o.word_emb, "Word embedding table for text members");
    run->add_option("--label-texts", o.label_texts, "Label descriptions for text members");
    add_solver_flags(run, o);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*featurize) cmd_featurize(o);
        else if (*embed) cmd_embed(o);
        else if (*index) cmd_index(o);
        else if (*tm) cmd_train_matcher(o);
        else if (*tr) cmd_train_ranker(o);
        else if (*pr) cmd_predict(o);
        else if (*ev) cmd_evaluate(o);
        else if (*en) cmd_ensemble(o);
        else if (*is) cmd_import_scores(o);
        else if (*cv) cmd_convert(o);
        else if (*run) cmd_run(o);
    } catch (const error& e) {
        std::cerr << "xmc: error [" << errc_name(e.code()) << "]: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "xmc: error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

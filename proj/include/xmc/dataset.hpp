// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "xmc/detail/text_io.hpp"
#include "xmc/sparse.hpp"

namespace xmc {

enum class split_tag { train, valid, test };

/// Raw documents with their positive label sets.
struct dataset {
    std::vector<std::string> docs;
    std::vector<std::vector<index_t>> positives;
    std::size_t num_labels = 0;
    split_tag split = split_tag::train;
    std::vector<std::string> label_texts;

    std::size_t size() const noexcept { return docs.size(); }

    /// N x num_labels binary matrix.
    sparse_matrix label_matrix() const {
        sparse_matrix Y(num_labels);
        for (const auto& pos : positives) {
            std::vector<double> ones(pos.size(), 1.0);
            Y.append_row({pos, ones, num_labels});
        }
        return Y;
    }
};

namespace detail {

inline std::vector<index_t> parse_label_list(std::string_view s, std::size_t line_no) {
    std::vector<index_t> out;
    std::size_t i = 0;
    while (i <= s.size()) {
        std::size_t j = s.find(',', i);
        if (j == std::string_view::npos) j = s.size();
        auto tok = s.substr(i, j - i);
        while (!tok.empty() && (tok.front() == ' ')) tok.remove_prefix(1);
        while (!tok.empty() && (tok.back() == ' ' || tok.back() == '\r')) tok.remove_suffix(1);
        if (!tok.empty()) {
            index_t id = 0;
            if (!parse_int(tok, id)) throw parse_failure("bad label id '" + std::string(tok) + "'", line_no);
            out.push_back(id);
        }
        i = j + 1;
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

inline void finish_dataset(dataset& d, std::optional<std::size_t> num_labels) {
    if (d.docs.empty()) throw error(errc::empty_dataset, "dataset has no instances");
    std::size_t seen = 0;
    for (const auto& pos : d.positives)
        if (!pos.empty()) seen = std::max<std::size_t>(seen, pos.back() + std::size_t{1});
    // Labels a test split introduces beyond the training space stay in the
    // truth sets as unreachable positives.
    d.num_labels = std::max(num_labels.value_or(0), seen);
}

} // namespace detail

/// Reads "label,label,...<TAB>raw text" lines. `num_labels` fixes the label
/// space (pass the training split's); otherwise it is max id + 1.
inline dataset load_dataset(const std::string& path, split_tag split = split_tag::train,
                            std::optional<std::size_t> num_labels = std::nullopt) {
    auto in = detail::open_in(path);
    dataset d;
    d.split = split;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos) throw detail::parse_failure("expected 'labels<TAB>text'", line_no);
        d.positives.push_back(detail::parse_label_list(std::string_view(line).substr(0, tab), line_no));
        d.docs.push_back(line.substr(tab + 1));
    }
    detail::finish_dataset(d, num_labels);
    return d;
}

/// Parallel text and label files: line i of each describes instance i.
inline dataset load_dataset(const std::string& text_path, const std::string& labels_path,
                            split_tag split = split_tag::train, std::optional<std::size_t> num_labels = std::nullopt) {
    auto tin = detail::open_in(text_path);
    auto lin = detail::open_in(labels_path);
    dataset d;
    d.split = split;
    std::string text, labels;
    std::size_t line_no = 0;
    while (true) {
        bool has_text = static_cast<bool>(std::getline(tin, text));
        bool has_labels = static_cast<bool>(std::getline(lin, labels));
        if (!has_text && !has_labels) break;
        ++line_no;
        if (has_text != has_labels) throw detail::parse_failure("text and label files differ in length", line_no);
        if (!text.empty() && text.back() == '\r') text.pop_back();
        d.positives.push_back(detail::parse_label_list(labels, line_no));
        d.docs.push_back(text);
    }
    detail::finish_dataset(d, num_labels);
    return d;
}

/// One label description per line, line i for label i.
inline std::vector<std::string> load_label_texts(const std::string& path) {
    auto in = detail::open_in(path);
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        out.push_back(line);
    }
    return out;
}

/// Parallel text and label-name files, where each label line holds
/// whitespace-separated label names. Names already in `label_names` keep
/// their ids; new names are appended in lexicographic order. Used to convert
/// name-labelled corpora into the combined id format.
inline dataset load_named_dataset(const std::string& text_path, const std::string& labels_path,
                                  std::vector<std::string>& label_names, split_tag split = split_tag::train) {
    auto tin = detail::open_in(text_path);
    auto lin = detail::open_in(labels_path);
    std::vector<std::string> texts;
    std::vector<std::vector<std::string>> names;
    std::string text, labels;
    std::size_t line_no = 0;
    while (true) {
        bool has_text = static_cast<bool>(std::getline(tin, text));
        bool has_labels = static_cast<bool>(std::getline(lin, labels));
        if (!has_text && !has_labels) break;
        ++line_no;
        if (has_text != has_labels) throw detail::parse_failure("text and label files differ in length", line_no);
        if (!text.empty() && text.back() == '\r') text.pop_back();
        texts.push_back(text);
        names.emplace_back();
        for (auto tok : detail::split_ws(labels)) names.back().emplace_back(tok);
    }
    std::unordered_map<std::string, index_t> ids;
    for (std::size_t l = 0; l < label_names.size(); ++l) ids.emplace(label_names[l], static_cast<index_t>(l));
    std::vector<std::string> fresh;
    for (const auto& row : names)
        for (const auto& n : row)
            if (!ids.count(n)) fresh.push_back(n);
    std::sort(fresh.begin(), fresh.end());
    fresh.erase(std::unique(fresh.begin(), fresh.end()), fresh.end());
    for (auto& n : fresh) {
        ids.emplace(n, static_cast<index_t>(label_names.size()));
        label_names.push_back(std::move(n));
    }

    dataset d;
    d.split = split;
    d.docs = std::move(texts);
    for (const auto& row : names) {
        std::vector<index_t> pos;
        for (const auto& n : row) pos.push_back(ids.at(n));
        std::sort(pos.begin(), pos.end());
        pos.erase(std::unique(pos.begin(), pos.end()), pos.end());
        d.positives.push_back(std::move(pos));
    }
    detail::finish_dataset(d, label_names.size());
    return d;
}

inline void save_dataset(const std::string& path, const dataset& d) {
    auto out = detail::open_out(path);
    for (std::size_t i = 0; i < d.size(); ++i) {
        for (std::size_t j = 0; j < d.positives[i].size(); ++j) out << (j ? "," : "") << d.positives[i][j];
        out << '\t' << d.docs[i] << '\n';
    }
}

/// Seeded uniform hold-out of floor(N * fraction) instances. Both parts keep
/// the original instance order and the training label space.
inline std::pair<dataset, dataset> split_validation(const dataset& train, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw error(errc::bad_input, "validation fraction must be in (0, 1)");
    const std::size_t n = train.size();
    const auto n_valid = static_cast<std::size_t>(std::floor(static_cast<double>(n) * fraction + 1e-9));
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<char> is_valid(n, 0);
    for (std::size_t i = 0; i < n_valid; ++i) is_valid[perm[i]] = 1;

    dataset tr, va;
    tr.split = split_tag::train;
    va.split = split_tag::valid;
    tr.num_labels = va.num_labels = train.num_labels;
    tr.label_texts = va.label_texts = train.label_texts;
    for (std::size_t i = 0; i < n; ++i) {
        auto& dst = is_valid[i] ? va : tr;
        dst.docs.push_back(train.docs[i]);
        dst.positives.push_back(train.positives[i]);
    }
    return {std::move(tr), std::move(va)};
}

} // namespace xmc

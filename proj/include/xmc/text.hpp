// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "xmc/detail/text_io.hpp"
#include "xmc/sparse.hpp"

namespace xmc {

inline constexpr std::size_t max_doc_tokens = 300;
inline constexpr std::string_view num_token = "<num>";

using token_sequence = std::vector<std::string>;

namespace detail {

inline bool is_alpha_byte(unsigned char c) noexcept {
    // Bytes >= 0x80 belong to UTF-8 sequences and are kept inside words.
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

inline bool is_digit_byte(unsigned char c) noexcept { return c >= '0' && c <= '9'; }

inline char lower_byte(unsigned char c) noexcept {
    return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c);
}

} // namespace detail

/// Lowercases, splits on anything that is not a letter or digit, maps every
/// digit run to `<num>` and keeps the first 300 tokens. A literal `<num>` in
/// the input is recognised so that tokenizing joined output is a no-op.
inline token_sequence tokenize(std::string_view text) {
    token_sequence out;
    std::size_t i = 0;
    while (i < text.size() && out.size() < max_doc_tokens) {
        auto c = static_cast<unsigned char>(text[i]);
        if (c == '<' && text.size() - i >= num_token.size()) {
            bool match = true;
            for (std::size_t j = 0; j < num_token.size(); ++j)
                if (detail::lower_byte(static_cast<unsigned char>(text[i + j])) != num_token[j]) match = false;
            if (match) {
                out.emplace_back(num_token);
                i += num_token.size();
                continue;
            }
        }
        if (detail::is_digit_byte(c)) {
            while (i < text.size() && detail::is_digit_byte(static_cast<unsigned char>(text[i]))) ++i;
            out.emplace_back(num_token);
        } else if (detail::is_alpha_byte(c)) {
            std::string word;
            while (i < text.size() && detail::is_alpha_byte(static_cast<unsigned char>(text[i])))
                word.push_back(detail::lower_byte(static_cast<unsigned char>(text[i++])));
            out.push_back(std::move(word));
        } else {
            ++i;
        }
    }
    return out;
}

inline std::string join_tokens(const token_sequence& tokens) {
    std::string s;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) s.push_back(' ');
        s += tokens[i];
    }
    return s;
}

class vocabulary {
  public:
    static constexpr index_t npos = static_cast<index_t>(-1);

    vocabulary() = default;

    /// Tokens must be in id order; validates df range and uniqueness.
    vocabulary(std::vector<std::string> tokens, std::vector<std::size_t> df, std::size_t corpus_size)
        : tokens_(std::move(tokens)), df_(std::move(df)), corpus_size_(corpus_size) {
        if (tokens_.size() != df_.size()) throw error(errc::bad_input, "token/df length mismatch");
        for (std::size_t i = 0; i < tokens_.size(); ++i) {
            if (df_[i] < 1 || df_[i] > corpus_size_)
                throw error(errc::bad_input, "df of '" + tokens_[i] + "' outside [1, corpus_size]");
            if (!ids_.emplace(tokens_[i], static_cast<index_t>(i)).second)
                throw error(errc::bad_input, "duplicate token '" + tokens_[i] + "'");
        }
    }

    std::size_t size() const noexcept { return tokens_.size(); }
    std::size_t corpus_size() const noexcept { return corpus_size_; }
    const std::string& token(index_t id) const { return tokens_.at(id); }
    std::size_t df(index_t id) const { return df_.at(id); }

    index_t find(const std::string& tok) const {
        auto it = ids_.find(tok);
        return it == ids_.end() ? npos : it->second;
    }

    /// Smoothed inverse document frequency ln((1+N)/(1+df)) + 1.
    double idf(index_t id) const {
        return std::log((1.0 + static_cast<double>(corpus_size_)) / (1.0 + static_cast<double>(df_.at(id)))) + 1.0;
    }

  private:
    std::vector<std::string> tokens_;
    std::vector<std::size_t> df_;
    std::size_t corpus_size_ = 0;
    std::unordered_map<std::string, index_t> ids_;
};

/// Document frequencies over `corpus`; keeps tokens with df >= min_df and
/// numbers them in lexicographic order.
inline vocabulary build_vocab(const std::vector<token_sequence>& corpus, std::size_t min_df = 1) {
    if (corpus.empty()) throw error(errc::bad_input, "cannot build a vocabulary from an empty corpus");
    std::map<std::string, std::size_t> df;
    std::unordered_set<std::string_view> seen;
    for (const auto& doc : corpus) {
        seen.clear();
        for (const auto& tok : doc)
            if (seen.insert(tok).second) ++df[tok];
    }
    std::vector<std::string> tokens;
    std::vector<std::size_t> counts;
    for (auto& [tok, n] : df) {
        if (n >= min_df) {
            tokens.push_back(tok);
            counts.push_back(n);
        }
    }
    return vocabulary(std::move(tokens), std::move(counts), corpus.size());
}

/// Raw-count tf times smoothed idf, L2-normalized. Out-of-vocabulary tokens
/// are ignored; a document with none left is an `empty_feature` error.
inline sparse_vector tfidf(const token_sequence& doc, const vocabulary& vocab) {
    std::vector<std::pair<index_t, double>> entries;
    entries.reserve(doc.size());
    for (const auto& tok : doc) {
        index_t id = vocab.find(tok);
        if (id != vocabulary::npos) entries.emplace_back(id, 1.0);
    }
    if (entries.empty()) throw error(errc::empty_feature, "document has no in-vocabulary tokens");
    auto counts = sparse_vector::from_entries(vocab.size(), std::move(entries));
    std::vector<double> weighted(counts.values());
    for (std::size_t i = 0; i < weighted.size(); ++i) weighted[i] *= vocab.idf(counts.indices()[i]);
    return l2_normalize(sparse_vector(vocab.size(), counts.indices(), std::move(weighted)).view());
}

/// Featurizes every document; documents without in-vocabulary tokens become
/// empty rows and are counted in `empty_rows`.
inline sparse_matrix tfidf_matrix(const std::vector<token_sequence>& docs, const vocabulary& vocab,
                                  std::size_t* empty_rows = nullptr) {
    sparse_matrix m(vocab.size());
    std::size_t empties = 0;
    for (const auto& doc : docs) {
        try {
            m.append_row(tfidf(doc, vocab).view());
        } catch (const error& e) {
            if (e.code() != errc::empty_feature) throw;
            m.append_empty_row();
            ++empties;
        }
    }
    if (empty_rows) *empty_rows = empties;
    return m;
}

// Vocabulary file: "#corpus_size N", then "token<TAB>id<TAB>df" by id.

inline void save_vocabulary(const std::string& path, const vocabulary& vocab) {
    auto out = detail::open_out(path);
    out << "#corpus_size " << vocab.corpus_size() << '\n';
    for (index_t i = 0; i < vocab.size(); ++i) out << vocab.token(i) << '\t' << i << '\t' << vocab.df(i) << '\n';
}

inline vocabulary load_vocabulary(const std::string& path) {
    auto in = detail::open_in(path);
    std::string line;
    std::size_t line_no = 1, corpus_size = 0;
    if (!std::getline(in, line) || line.rfind("#corpus_size ", 0) != 0 ||
        !detail::parse_int(std::string_view(line).substr(13), corpus_size))
        throw detail::parse_failure("missing '#corpus_size N' header", line_no);
    std::vector<std::string> tokens;
    std::vector<std::size_t> df;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto t1 = line.find('\t');
        auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
        std::size_t id = 0, n = 0;
        if (t2 == std::string::npos || !detail::parse_int(std::string_view(line).substr(t1 + 1, t2 - t1 - 1), id) ||
            !detail::parse_int(std::string_view(line).substr(t2 + 1), n))
            throw detail::parse_failure("bad vocabulary line", line_no);
        if (id != tokens.size()) throw detail::parse_failure("vocabulary ids must be contiguous", line_no);
        tokens.push_back(line.substr(0, t1));
        df.push_back(n);
    }
    return vocabulary(std::move(tokens), std::move(df), corpus_size);
}

} // namespace xmc

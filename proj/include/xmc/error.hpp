// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace xmc {

enum class errc {
    dimension_mismatch,
    empty_vector,
    empty_feature,
    too_small,
    bad_k,
    bad_input,
    bad_score_file,
    ensemble_mismatch,
    empty_dataset,
    parse_error,
    io_error,
};

inline std::string_view errc_name(errc code) noexcept {
    switch (code) {
    case errc::dimension_mismatch: return "DimensionMismatch";
    case errc::empty_vector: return "EmptyVector";
    case errc::empty_feature: return "EmptyFeature";
    case errc::too_small: return "TooSmall";
    case errc::bad_k: return "BadK";
    case errc::bad_input: return "BadInput";
    case errc::bad_score_file: return "BadScoreFile";
    case errc::ensemble_mismatch: return "EnsembleMismatch";
    case errc::empty_dataset: return "EmptyDataset";
    case errc::parse_error: return "ParseError";
    case errc::io_error: return "IOError";
    }
    return "Unknown";
}

/// Every failure in the library is reported as an `xmc::error` carrying a
/// machine-checkable code next to the human-readable message.
class error : public std::runtime_error {
  public:
    error(errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

    errc code() const noexcept { return code_; }

  private:
    errc code_;
};

} // namespace xmc

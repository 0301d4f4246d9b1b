#pragma once

#include <stdexcept>
#include <string>

namespace mdi {

// Validation failures map to CLI exit code 2, numeric failures to 3.
enum class ErrCode {
    generic,
    unresolved_location,
    missing_user,
    unknown_city,
    empty_input,
    invalid_pct,
    invalid_config,
    shape_mismatch,
    out_of_range,
    length_mismatch,
    unknown_label,
    missing_coordinates,
    no_eligible_cities,
    label_set_mismatch,
    vocab_mismatch,
    degenerate_chance,
    bad_file,
};

class DataError : public std::runtime_error {
  public:
    DataError(ErrCode code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
    explicit DataError(const std::string& msg) : DataError(ErrCode::generic, msg) {}
    ErrCode code() const { return code_; }

  private:
    ErrCode code_;
};

class NumericError : public std::runtime_error {
  public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace mdi

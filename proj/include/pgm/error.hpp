#ifndef PGM_ERROR_HPP
#define PGM_ERROR_HPP

#include <stdexcept>
#include <string>

namespace pgm {

/// Library error carrying a stable machine-parsable category slug
/// ("parse-error", "degenerate-support", ...) plus a human-readable detail.
class Error : public std::runtime_error {
 public:
  Error(std::string category, const std::string& detail)
      : std::runtime_error(category + ": " + detail),
        category_(std::move(category)) {}

  const std::string& category() const noexcept { return category_; }

 private:
  std::string category_;
};

}  // namespace pgm

#endif

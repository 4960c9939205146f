#ifndef OVB_ERROR_H_
#define OVB_ERROR_H_

#include <stdexcept>
#include <string>

namespace ovb {

// Broad failure classes. The CLI maps these onto process exit codes.
enum class ErrorKind {
  kInvalidArgument,  // bad configuration or precondition violation
  kShape,            // array shapes do not conform
  kData,             // malformed or inconsistent input data
  kNumerical,        // singular system, divergence, non-finite values
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool ok, ErrorKind kind, const std::string& what) {
  if (!ok) throw Error(kind, what);
}

}  // namespace ovb

#endif  // OVB_ERROR_H_

#include "tfphase/error.hpp"

namespace tfphase {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid argument";
    case ErrorKind::unsupported: return "unsupported operation";
    case ErrorKind::io: return "i/o error";
    case ErrorKind::numerical: return "numerical error";
    case ErrorKind::domain: return "domain error";
  }
  return "error";
}

}  // namespace tfphase

#include "agentprm/error.hpp"

namespace agentprm {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config: return "config";
    case ErrorKind::IllegalAction: return "illegal-action";
    case ErrorKind::Protocol: return "protocol";
    case ErrorKind::OracleUnavailable: return "oracle-unavailable";
    case ErrorKind::Data: return "data";
    case ErrorKind::Divergence: return "divergence";
    case ErrorKind::Aggregation: return "aggregation";
    case ErrorKind::Internal: return "internal";
  }
  return "unknown";
}

}  // namespace agentprm

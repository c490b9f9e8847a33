#include "outskirt/error.hpp"

namespace outskirt {

int Error::exit_code() const noexcept {
    switch (kind_) {
        case ErrorKind::config: return 2;
        case ErrorKind::data: return 3;
        case ErrorKind::numeric: return 4;
        case ErrorKind::state: return 1;
    }
    return 1;
}

}  // namespace outskirt

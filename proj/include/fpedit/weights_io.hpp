#ifndef FPEDIT_WEIGHTS_IO_HPP
#define FPEDIT_WEIGHTS_IO_HPP

#include <string>

#include "fpedit/linalg.hpp"

namespace fpedit {

// Binary matrix format: magic "FPED", version u8 = 1, rows u32 LE, cols u32 LE,
// row-major float64 LE payload.
void save_matrix(const std::string& path, const Matrix& m);
Matrix load_matrix(const std::string& path);

} // namespace fpedit

#endif

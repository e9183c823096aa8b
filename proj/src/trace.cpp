// SPDX-License-Identifier: Apache-2.0

#include "faultline/trace.hpp"

#include <array>
#include <cstdio>
#include <ostream>

namespace faultline {

void RegisterTrace::write_csv(std::ostream& out) const {
  out << "cycle,class,index,raw\n";
  std::array<char, 64> line{};
  for (const auto& e : entries_) {
    const int n = std::snprintf(line.data(), line.size(), "%llu,%s,%u,0x%0*x\n",
                                static_cast<unsigned long long>(e.cycle), to_string(e.cls).c_str(),
                                e.index, (e.value.width() + 3) / 4, e.value.raw());
    out.write(line.data(), n);
  }
}

}  // namespace faultline

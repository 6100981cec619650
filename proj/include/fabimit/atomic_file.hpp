#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <string>
#include <unistd.h>

#include "fabimit/errors.hpp"

namespace fabimit {

// Writes through a staging file next to `path`, then renames it into place,
// so readers never observe a partial file. Parent directories are created.
inline void atomic_write(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body,
                         bool binary = false) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path staging = path;
  staging += ".staging-" + std::to_string(::getpid());
  auto discard = [&] {
    std::error_code ec;
    std::filesystem::remove(staging, ec);
  };
  {
    std::ofstream os(staging, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
    if (!os) throw Error("cannot open " + staging.string() + " for writing");
    os << std::setprecision(17);
    try {
      body(os);
    } catch (...) {
      os.close();
      discard();
      throw;
    }
    os.flush();
    if (!os) {
      os.close();
      discard();
      throw Error("write failed for " + path.string());
    }
  }
  std::filesystem::rename(staging, path);
}

}  // namespace fabimit

//
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <filesystem>
#include <string>

#include "chemlm/core/error.hpp"

namespace chemlm {

inline constexpr const char *kLockFileName = ".lock";

// Exclusive advisory lock on <run_dir>/.lock for the lifetime of the
// object. The kernel drops the lock if the process dies.
class RunDirLock {
public:
  explicit RunDirLock(const std::string &run_dir) {
    std::error_code ec;
    std::filesystem::create_directories(run_dir, ec);
    if (ec)
      throw Error(ErrorCode::kIo, "cannot create run directory " + run_dir);
    path_ = (std::filesystem::path(run_dir) / kLockFileName).string();
    fd_ = ::open(path_.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0)
      throw Error(ErrorCode::kIo, "cannot open lock file " + path_);
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
      ::close(fd_);
      fd_ = -1;
      throw Error(ErrorCode::kIo, "run directory is in use by another process: " + run_dir);
    }
    std::string pid = std::to_string(::getpid()) + "\n";
    if (::ftruncate(fd_, 0) == 0)
      (void)!::write(fd_, pid.data(), pid.size());
  }

  RunDirLock(const RunDirLock &) = delete;
  RunDirLock &operator=(const RunDirLock &) = delete;

  ~RunDirLock() {
    if (fd_ >= 0) {
      ::flock(fd_, LOCK_UN);
      ::close(fd_);
    }
  }

  const std::string &path() const { return path_; }

private:
  std::string path_;
  int fd_ = -1;
};

}  // namespace chemlm

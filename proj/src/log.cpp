#include "pacgp/log.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>

namespace pacgp {
namespace {

std::mutex g_mutex;
std::atomic<bool> g_verbose{false};

bool quiet() {
  static const bool q = std::getenv("PACGP_QUIET") != nullptr;
  return q;
}

}  // namespace

void set_verbose(bool verbose) { g_verbose = verbose; }

void log_warning(const std::string& msg) {
  if (quiet()) return;
  std::lock_guard<std::mutex> lock(g_mutex);
  std::cerr << "pacgp: warning: " << msg << '\n';
}

void log_info(const std::string& msg) {
  if (quiet() || !g_verbose) return;
  std::lock_guard<std::mutex> lock(g_mutex);
  std::cerr << "pacgp: " << msg << '\n';
}

}  // namespace pacgp

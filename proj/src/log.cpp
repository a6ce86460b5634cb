#include "hydg/log.hpp"

#include <iostream>
#include <mutex>

namespace hydg {
namespace {

std::mutex& handler_mutex() {
  static std::mutex m;
  return m;
}

WarningHandler& current() {
  static WarningHandler h;
  return h;
}

}  // namespace

void warn(std::string_view message) {
  std::lock_guard lock(handler_mutex());
  if (current()) {
    current()(message);
  } else {
    std::cerr << "warning: " << message << '\n';
  }
}

WarningHandler set_warning_handler(WarningHandler handler) {
  std::lock_guard lock(handler_mutex());
  return std::exchange(current(), std::move(handler));
}

WarningCapture::WarningCapture()
    : previous_(set_warning_handler([this](std::string_view m) { messages_.emplace_back(m); })) {}

WarningCapture::~WarningCapture() { set_warning_handler(std::move(previous_)); }

}  // namespace hydg

#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace hydg {

using WarningHandler = std::function<void(std::string_view)>;

// Reports a non-fatal condition. The default handler prints to stderr.
void warn(std::string_view message);

// Installs `handler` (or the stderr default when empty) and returns the
// previous one.
WarningHandler set_warning_handler(WarningHandler handler);

// Collects warnings for its lifetime instead of printing them.
class WarningCapture {
 public:
  WarningCapture();
  ~WarningCapture();
  WarningCapture(const WarningCapture&) = delete;
  WarningCapture& operator=(const WarningCapture&) = delete;

  const std::vector<std::string>& messages() const { return messages_; }

 private:
  std::vector<std::string> messages_;
  WarningHandler previous_;
};

}  // namespace hydg

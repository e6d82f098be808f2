// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

namespace molrefine::testing {

std::filesystem::path fixture_path(const std::string& name);
std::filesystem::path data_path(const std::string& name);

/// Non-blank, non-comment lines; the first whitespace-separated field when `first_field`.
std::vector<std::string> read_lines(const std::filesystem::path& path, bool first_field = false);
std::string read_text(const std::filesystem::path& path);

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Chat-completions endpoint on 127.0.0.1 with a pluggable handler.
class MockChatServer {
 public:
  struct Seen {
    std::string body;
    std::string authorization;
    std::string path;
  };
  using Handler = std::function<void(const httplib::Request&, httplib::Response&, std::size_t call)>;

  explicit MockChatServer(Handler handler);
  ~MockChatServer();
  MockChatServer(const MockChatServer&) = delete;
  MockChatServer& operator=(const MockChatServer&) = delete;

  std::string base_url() const;
  std::vector<Seen> requests() const;
  std::size_t calls() const;

  /// OpenAI-style completion body with `content` as the single choice.
  static std::string completion(const std::string& content);

 private:
  httplib::Server server_;
  Handler handler_;
  int port_ = 0;
  std::thread thread_;
  mutable std::mutex mutex_;
  std::vector<Seen> seen_;
};

}  // namespace molrefine::testing

// SPDX-License-Identifier: Apache-2.0
#include "test_support.hpp"

#include <atomic>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace molrefine::testing {

namespace fs = std::filesystem;

fs::path fixture_path(const std::string& name) { return fs::path(MOLREFINE_FIXTURE_DIR) / name; }
fs::path data_path(const std::string& name) { return fs::path(MOLREFINE_DATA_DIR) / name; }

std::vector<std::string> read_lines(const fs::path& path, bool first_field) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (first_field) {
      std::istringstream fields(line);
      fields >> line;
    }
    out.push_back(line);
  }
  return out;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return {};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TempDir::TempDir(const std::string& tag) {
  static std::atomic<unsigned> counter{0};
  std::random_device rd;
  path_ = fs::temp_directory_path() /
          ("molrefine-" + tag + "-" + std::to_string(rd()) + "-" + std::to_string(counter++));
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

MockChatServer::MockChatServer(Handler handler) : handler_(std::move(handler)) {
  server_.Post(R"(.*/chat/completions)", [this](const httplib::Request& req, httplib::Response& res) {
    std::size_t call = 0;
    {
      std::lock_guard lock(mutex_);
      call = seen_.size();
      seen_.push_back({req.body, req.get_header_value("Authorization"), req.path});
    }
    handler_(req, res, call);
  });
  port_ = server_.bind_to_any_port("127.0.0.1");
  if (port_ <= 0) throw std::runtime_error("mock server could not bind");
  thread_ = std::thread([this] { server_.listen_after_bind(); });
  server_.wait_until_ready();
}

MockChatServer::~MockChatServer() {
  server_.stop();
  if (thread_.joinable()) thread_.join();
}

std::string MockChatServer::base_url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

std::vector<MockChatServer::Seen> MockChatServer::requests() const {
  std::lock_guard lock(mutex_);
  return seen_;
}

std::size_t MockChatServer::calls() const {
  std::lock_guard lock(mutex_);
  return seen_.size();
}

std::string MockChatServer::completion(const std::string& content) {
  nlohmann::json j = {
      {"id", "mock"},
      {"object", "chat.completion"},
      {"choices", {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", content}}}, {"finish_reason", "stop"}}}},
      {"usage", {{"prompt_tokens", 11}, {"completion_tokens", 3}, {"total_tokens", 14}}}};
  return j.dump();
}

}  // namespace molrefine::testing

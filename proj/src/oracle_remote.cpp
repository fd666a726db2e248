#include "hardpatch/oracle_remote.hpp"

#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "hardpatch/errors.hpp"
#include "hardpatch/png_io.hpp"
#include "httplib.h"
#include "json.hpp"

namespace hardpatch {

std::string encode_wire_request(long long id, const Image& img) {
  nlohmann::json j;
  j["id"] = id;
  std::vector<uint8_t> png = encode_png(img);
  j["png_b64"] = base64_encode(png.data(), png.size());
  return j.dump();
}

int decode_wire_response(const std::string& line, long long expect_id) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception&) {
    throw ProtocolError("oracle protocol: reply is not JSON: " + line);
  }
  if (!j.is_object() || !j.contains("id") || !j.contains("label")) {
    throw ProtocolError("oracle protocol: reply missing id/label");
  }
  if (!j["label"].is_number_integer()) {
    throw ProtocolError("oracle protocol: label is not an integer");
  }
  if (!j["id"].is_number_integer() || j["id"].get<long long>() != expect_id) {
    throw ProtocolError("oracle protocol: reply id mismatch");
  }
  return j["label"].get<int>();
}

ExternalProcessOracle::ExternalProcessOracle(const std::string& command,
                                             double timeout_seconds)
    : timeout_seconds_(timeout_seconds) {
  int to_pipe[2];
  int from_pipe[2];
  if (pipe(to_pipe) != 0 || pipe(from_pipe) != 0) {
    throw OracleIoError("process oracle: pipe() failed");
  }
  pid_t pid = fork();
  if (pid < 0) {
    throw OracleIoError("process oracle: fork() failed");
  }
  if (pid == 0) {
    dup2(to_pipe[0], STDIN_FILENO);
    dup2(from_pipe[1], STDOUT_FILENO);
    close(to_pipe[0]);
    close(to_pipe[1]);
    close(from_pipe[0]);
    close(from_pipe[1]);
    execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  child_pid_ = pid;
  to_child_ = to_pipe[1];
  from_child_ = from_pipe[0];
  close(to_pipe[0]);
  close(from_pipe[1]);
}

ExternalProcessOracle::~ExternalProcessOracle() { shutdown(); }

void ExternalProcessOracle::shutdown() {
  if (to_child_ >= 0) close(to_child_);
  if (from_child_ >= 0) close(from_child_);
  to_child_ = from_child_ = -1;
  if (child_pid_ > 0) {
    kill(child_pid_, SIGTERM);
    waitpid(child_pid_, nullptr, 0);
    child_pid_ = -1;
  }
}

std::string ExternalProcessOracle::read_line_with_timeout() {
  for (;;) {
    auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    struct pollfd pfd{from_child_, POLLIN, 0};
    int rc = poll(&pfd, 1, static_cast<int>(timeout_seconds_ * 1000));
    if (rc == 0) throw OracleIoError("process oracle: reply timed out");
    if (rc < 0) throw OracleIoError("process oracle: poll failed");
    char chunk[4096];
    ssize_t n = read(from_child_, chunk, sizeof(chunk));
    if (n <= 0) throw OracleIoError("process oracle: backend closed the pipe");
    buffer_.append(chunk, static_cast<size_t>(n));
  }
}

int ExternalProcessOracle::classify(const Image& img) {
  if (to_child_ < 0) throw OracleIoError("process oracle: backend not running");
  const long long id = next_id_++;
  std::string line = encode_wire_request(id, img);
  line.push_back('\n');
  size_t off = 0;
  while (off < line.size()) {
    ssize_t n = write(to_child_, line.data() + off, line.size() - off);
    if (n <= 0) {
      if (errno == EINTR) continue;
      throw OracleIoError("process oracle: write failed (backend gone?)");
    }
    off += static_cast<size_t>(n);
  }
  return decode_wire_response(read_line_with_timeout(), id);
}

struct HttpOracle::Impl {
  httplib::Client client;
  std::string token;
  Impl(const std::string& base, double timeout)
      : client(base) {
    client.set_read_timeout(static_cast<time_t>(timeout),
                            static_cast<time_t>((timeout - static_cast<time_t>(timeout)) * 1e6));
    client.set_connection_timeout(static_cast<time_t>(timeout), 0);
  }
};

HttpOracle::HttpOracle(const std::string& base_url, std::string bearer_token,
                       double timeout_seconds)
    : impl_(std::make_unique<Impl>(base_url, timeout_seconds)) {
  impl_->token = std::move(bearer_token);
}

HttpOracle::~HttpOracle() = default;

int HttpOracle::classify(const Image& img) {
  const long long id = next_id_++;
  httplib::Headers headers;
  if (!impl_->token.empty()) {
    headers.emplace("Authorization", "Bearer " + impl_->token);
  }
  auto res = impl_->client.Post("/classify", headers,
                                encode_wire_request(id, img) + "\n",
                                "application/json");
  if (!res) throw OracleIoError("http oracle: request failed");
  if (res->status != 200) {
    throw OracleIoError("http oracle: status " + std::to_string(res->status));
  }
  std::string body = res->body;
  while (!body.empty() && (body.back() == '\n' || body.back() == '\r')) body.pop_back();
  return decode_wire_response(body, id);
}

std::shared_ptr<HardLabelOracle> open_remote_oracle(const std::string& locator,
                                                    double timeout_seconds,
                                                    const std::string& bearer_token) {
  if (locator.rfind("proc:", 0) == 0) {
    return std::make_shared<ExternalProcessOracle>(locator.substr(5), timeout_seconds);
  }
  if (locator.rfind("http:", 0) == 0 || locator.rfind("https:", 0) == 0) {
    return std::make_shared<HttpOracle>(locator, bearer_token, timeout_seconds);
  }
  throw std::invalid_argument("oracle locator must be proc:CMD or http:URL");
}

}  // namespace hardpatch

#pragma once

#include <memory>
#include <string>

#include "hardpatch/oracle.hpp"

namespace hardpatch {

// Wire protocol shared by the process and HTTP clients: UTF-8, one JSON
// object per LF-terminated line.
//   request:  {"id": int, "png_b64": string}
//   response: {"id": int, "label": int}
std::string encode_wire_request(long long id, const Image& img);
// Throws ProtocolError on malformed or mismatched replies.
int decode_wire_response(const std::string& line, long long expect_id);

// Black box behind a child process speaking the wire protocol on
// stdin/stdout. One request per image; replies arrive in order.
class ExternalProcessOracle : public HardLabelOracle {
 public:
  explicit ExternalProcessOracle(const std::string& command,
                                 double timeout_seconds = 30.0);
  ~ExternalProcessOracle() override;
  ExternalProcessOracle(const ExternalProcessOracle&) = delete;
  ExternalProcessOracle& operator=(const ExternalProcessOracle&) = delete;

  int classify(const Image& img) override;
  bool concurrent_safe() const override { return false; }

 private:
  std::string read_line_with_timeout();
  void shutdown();

  int child_pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
  long long next_id_ = 0;
  double timeout_seconds_;
};

// Black box behind POST <base>/classify; responses are correlated by id.
class HttpOracle : public HardLabelOracle {
 public:
  explicit HttpOracle(const std::string& base_url,
                      std::string bearer_token = "",
                      double timeout_seconds = 30.0);
  ~HttpOracle() override;

  int classify(const Image& img) override;
  bool concurrent_safe() const override { return false; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  long long next_id_ = 0;
};

// Builds an oracle from a CLI-style locator: "proc:CMD" or "http:URL".
std::shared_ptr<HardLabelOracle> open_remote_oracle(const std::string& locator,
                                                    double timeout_seconds = 30.0,
                                                    const std::string& bearer_token = "");

}  // namespace hardpatch

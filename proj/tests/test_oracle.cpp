#include "doctest.h"

#include <thread>

#include "hardpatch/errors.hpp"
#include "hardpatch/fixtures.hpp"
#include "hardpatch/oracle.hpp"
#include "hardpatch/oracle_remote.hpp"
#include "hardpatch/png_io.hpp"
#include "httplib.h"
#include "json.hpp"

using namespace hardpatch;

namespace {

Image constant_image(float v) { return Image(4, 4, 1, v); }

std::vector<std::pair<int, Image>> two_prototypes() {
  return {{0, constant_image(0.0f)}, {1, constant_image(1.0f)}};
}

}  // namespace

TEST_CASE("template classifier distance rule") {
  TemplateClassifier cls(two_prototypes());
  SUBCASE("nearest prototype wins") {
    CHECK(cls.classify(constant_image(0.9f)) == 1);
    CHECK(cls.classify(constant_image(0.1f)) == 0);
  }
  SUBCASE("a prototype classifies as itself") {
    CHECK(cls.classify(constant_image(0.0f)) == 0);
    CHECK(cls.classify(constant_image(1.0f)) == 1);
  }
  SUBCASE("exact tie breaks to the lowest label") {
    CHECK(cls.classify(constant_image(0.5f)) == 0);
  }
  SUBCASE("mismatched shapes are resized before comparison") {
    Image big(16, 16, 1, 0.95f);
    CHECK(cls.classify(big) == 1);
  }
}

TEST_CASE("ledger accounting and budget") {
  TemplateClassifier cls(two_prototypes());
  QueryLedger ledger;
  for (int i = 0; i < 5; ++i) query(cls, constant_image(0.9f), ledger, "a");
  for (int i = 0; i < 3; ++i) query(cls, constant_image(0.9f), ledger, "b");
  CHECK(ledger.total() == 8);
  CHECK(ledger.phase("a") == 5);
  CHECK(ledger.phase("b") == 3);
  CHECK(ledger.phase("missing") == 0);

  long long sum = 0;
  for (auto& [name, count] : ledger.phases()) sum += count;
  CHECK(sum == ledger.total());

  ledger.set_budget(9);
  query(cls, constant_image(0.9f), ledger, "a");
  CHECK_THROWS_AS(query(cls, constant_image(0.9f), ledger, "a"), BudgetExceeded);
  // The failed call was not billed.
  CHECK(ledger.total() == 9);
}

TEST_CASE("non-finite images are rejected before dispatch") {
  TemplateClassifier cls(two_prototypes());
  QueryLedger ledger;
  Image bad = constant_image(0.5f);
  bad.data[3] = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(query(cls, bad, ledger, "a"), std::invalid_argument);
  CHECK(ledger.total() == 0);
}

TEST_CASE("caching wrapper short-circuits repeat queries") {
  auto inner = std::make_shared<TemplateClassifier>(two_prototypes());
  CachingOracle cached(inner);
  QueryLedger ledger;
  Image probe = constant_image(0.8f);
  int l1 = query(cached, probe, ledger, "x");
  int l2 = query(cached, probe, ledger, "x");
  CHECK(l1 == l2);
  CHECK(ledger.total() == 1);  // the repeat hit the cache, not the ledger
  CHECK(cached.entries() == 1);

  query(cached, constant_image(0.2f), ledger, "x");
  CHECK(ledger.total() == 2);
}

TEST_CASE("wire protocol encoding and decoding") {
  Image img = constant_image(0.25f);
  std::string req = encode_wire_request(12, img);
  nlohmann::json j = nlohmann::json::parse(req);
  CHECK(j["id"] == 12);
  std::vector<uint8_t> png = base64_decode(j["png_b64"].get<std::string>());
  Image back = decode_png(png.data(), png.size());
  CHECK(back.width == img.width);

  CHECK(decode_wire_response("{\"id\": 3, \"label\": 9}", 3) == 9);
  CHECK_THROWS_AS(decode_wire_response("abc", 0), ProtocolError);
  CHECK_THROWS_AS(decode_wire_response("{\"id\": 0, \"label\": \"x\"}", 0), ProtocolError);
  CHECK_THROWS_AS(decode_wire_response("{\"id\": 1, \"label\": 2}", 0), ProtocolError);
}

namespace {

// Line-at-a-time stub backends for the wire protocol.
std::string py_stub(const std::string& label_expr) {
  return "python3 -u -c 'import sys,json\n"
         "for line in sys.stdin:\n"
         "    req = json.loads(line)\n"
         "    print(json.dumps({\"id\": req[\"id\"], \"label\": " +
         label_expr + "}), flush=True)'";
}

}  // namespace

TEST_CASE("external process oracle") {
  SUBCASE("echo-style server maps every request to one label") {
    ExternalProcessOracle oracle(py_stub("7"));
    QueryLedger ledger;
    for (int i = 0; i < 4; ++i) {
      CHECK(query(oracle, constant_image(0.3f), ledger, "proc") == 7);
    }
    CHECK(ledger.phase("proc") == 4);
  }
  SUBCASE("labels alternating by request parity are counted exactly") {
    ExternalProcessOracle oracle(py_stub("req[\"id\"] % 2"));
    QueryLedger ledger;
    int flips = 0;
    for (int i = 0; i < 10; ++i) {
      flips += query(oracle, constant_image(0.3f), ledger, "proc");
    }
    CHECK(flips == 5);
    CHECK(ledger.total() == 10);
  }
  SUBCASE("malformed replies raise a protocol error") {
    ExternalProcessOracle oracle("python3 -u -c 'import sys\n"
                                 "for line in sys.stdin: print(\"abc\", flush=True)'");
    QueryLedger ledger;
    CHECK_THROWS_AS(query(oracle, constant_image(0.3f), ledger, "proc"),
                    ProtocolError);
  }
  SUBCASE("a dead backend raises oracle-io") {
    ExternalProcessOracle oracle("true");
    QueryLedger ledger;
    CHECK_THROWS_AS(query(oracle, constant_image(0.3f), ledger, "proc"),
                    OracleIoError);
  }
}

TEST_CASE("http oracle speaks the wire protocol") {
  httplib::Server server;
  std::string seen_auth;
  server.Post("/classify", [&](const httplib::Request& req, httplib::Response& res) {
    auto j = nlohmann::json::parse(req.body);
    seen_auth = req.get_header_value("Authorization");
    nlohmann::json out{{"id", j["id"]}, {"label", 5}};
    res.set_content(out.dump() + "\n", "application/json");
  });
  int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  {
    HttpOracle oracle("http://127.0.0.1:" + std::to_string(port), "sekrit");
    QueryLedger ledger;
    CHECK(query(oracle, constant_image(0.4f), ledger, "http") == 5);
    CHECK(seen_auth == "Bearer sekrit");
    CHECK(ledger.total() == 1);
  }
  server.stop();
  th.join();
}

TEST_CASE("string label map and levenshtein") {
  StringLabelMap map;
  int a = map.intern("ABC123");
  int b = map.intern("XYZ789");
  CHECK(map.intern("ABC123") == a);
  CHECK(a != b);
  CHECK(map.intern("") == StringLabelMap::kNoDetection);
  CHECK(map.name(a) == std::string("ABC123"));

  CHECK(levenshtein("kitten", "sitting") == 3);
  CHECK(levenshtein("", "abc") == 3);
  CHECK(levenshtein("same", "same") == 0);
}

TEST_CASE("desk fixture is classified as designed") {
  DeskFixture f = make_desk_fixture();
  TemplateClassifier cls(f.prototypes);
  CHECK(cls.classify(f.victim) == f.victim_label);
  CHECK(cls.classify(f.target_example) == f.target_label);
}

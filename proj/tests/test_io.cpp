#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "armor/io.hpp"
#include "test_util.hpp"

using namespace armor;
using testutil::random_instance;
using testutil::random_matrix;

namespace {

std::filesystem::path tmp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("armor_test_" + name);
}

std::vector<char> slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("AMF round-trips byte-exactly") {
  std::mt19937_64 rng(1);
  const DenseMatrix m = random_matrix(rng, 5, 7);
  const auto p1 = tmp_path("a.amf"), p2 = tmp_path("b.amf");
  io::write_amf(p1.string(), m);
  const DenseMatrix back = io::read_amf(p1.string());
  CHECK(back.rows() == 5);
  CHECK(back.cols() == 7);
  CHECK(back.data() == m.data());
  io::write_amf(p2.string(), back);
  CHECK(slurp(p1) == slurp(p2));
}

TEST_CASE("AMF rejects malformed files") {
  const auto p = tmp_path("bad.amf");
  {
    std::ofstream os(p, std::ios::binary);
    os << "NOPE0000000000000000";
  }
  CHECK_THROWS_AS(io::read_amf(p.string()), FormatError);
  {
    std::ofstream os(p, std::ios::binary);
    os << "ARMF";  // truncated header
  }
  CHECK_THROWS_AS(io::read_amf(p.string()), FormatError);
  CHECK_THROWS_AS(io::read_amf(tmp_path("does_not_exist.amf").string()),
                  FormatError);
}

TEST_CASE("CSV import by extension") {
  const auto p = tmp_path("m.csv");
  {
    std::ofstream os(p);
    os << "1,2.5,3\n-4,5,6e-1\n";
  }
  const DenseMatrix m = io::read_matrix_auto(p.string());
  CHECK(m.rows() == 2);
  CHECK(m.cols() == 3);
  CHECK(m.at(0, 1) == 2.5);
  CHECK(m.at(1, 2) == 0.6);

  {
    std::ofstream os(p);
    os << "1,2\n3\n";
  }
  CHECK_THROWS_AS(io::read_matrix_auto(p.string()), FormatError);
}

TEST_CASE("container round-trips") {
  std::mt19937_64 rng(2);
  const auto inst = random_instance(rng, 8, 8, 4);
  const auto p1 = tmp_path("c1.armc"), p2 = tmp_path("c2.armc");

  SUBCASE("without scalings") {
    io::write_container(p1.string(), inst.state);
    const io::Container c = io::read_container(p1.string());
    CHECK_FALSE(c.has_scalings());
    CHECK(c.state.block_size == 4);
    CHECK(c.state.core.mask() == inst.state.core.mask());
    // only the kept values survive the 2:4-compressed layout
    CHECK(c.state.core.values().data() ==
          inst.state.core.masked_values().data());
    for (std::size_t b = 0; b < 2; ++b) {
      CHECK(c.state.a.block(b).data() == inst.state.a.block(b).data());
      CHECK(c.state.b.block(b).data() == inst.state.b.block(b).data());
    }
    io::write_container(p2.string(), c.state);
    CHECK(slurp(p1) == slurp(p2));
  }

  SUBCASE("with scalings") {
    std::vector<double> r1(8), r2(8);
    std::uniform_real_distribution<double> dist(0.5, 2.0);
    for (auto& v : r1) v = dist(rng);
    for (auto& v : r2) v = dist(rng);
    io::write_container(p1.string(), inst.state, r1, r2);
    const io::Container c = io::read_container(p1.string());
    CHECK(c.r1 == r1);
    CHECK(c.r2 == r2);
    io::write_container(p2.string(), c.state, c.r1, c.r2);
    CHECK(slurp(p1) == slurp(p2));
  }

  SUBCASE("mismatched scaling vectors are rejected") {
    CHECK_THROWS_AS(io::write_container(p1.string(), inst.state, {1.0}, {}),
                    ContractViolation);
  }
}

TEST_CASE("container loader rejects corruption") {
  std::mt19937_64 rng(3);
  const auto inst = random_instance(rng, 4, 4, 4);
  const auto p = tmp_path("corrupt.armc");

  SUBCASE("bad magic") {
    io::write_container(p.string(), inst.state);
    std::fstream f(p, std::ios::binary | std::ios::in | std::ios::out);
    f.write("XXXX", 4);
    f.close();
    CHECK_THROWS_AS(io::read_container(p.string()), FormatError);
  }

  SUBCASE("index byte with i1 >= i2") {
    io::write_container(p.string(), inst.state);
    // Layout for a 4x4 single-block state: 48-byte header, 4 table entries of
    // 20 bytes, then sections A (128 B), B (128 B), core values (64 B), and
    // the core index bytes at offset 448.
    std::fstream f(p, std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(448);
    const char zero = 0;  // encodes i1 = i2 = 0
    f.write(&zero, 1);
    f.close();
    CHECK_THROWS_AS(io::read_container(p.string()), FormatError);
  }
}

TEST_CASE("trace CSV round-trips exactly") {
  LossTrace trace = {
      {0, TracePhase::Init, 61.112277261809709},
      {1, TracePhase::PostContinuous, 1.0 / 3.0},
      {1, TracePhase::PostSparse, 1e-17},
  };
  const auto p = tmp_path("trace.csv");
  io::write_trace_csv(p.string(), trace);
  const LossTrace back = io::read_trace_csv(p.string());
  REQUIRE(back.size() == trace.size());
  for (std::size_t i = 0; i < trace.size(); ++i) {
    CHECK(back[i].iteration == trace[i].iteration);
    CHECK(back[i].phase == trace[i].phase);
    CHECK(back[i].loss == trace[i].loss);  // bit-exact through %.17g
  }

  {
    std::ofstream os(p);
    os << "wrong,header,names\n";
  }
  CHECK_THROWS_AS(io::read_trace_csv(p.string()), FormatError);
}

TEST_CASE("trace SVG renders a polyline per point") {
  LossTrace trace = {
      {0, TracePhase::Init, 10.0},
      {1, TracePhase::PostContinuous, 5.0},
      {1, TracePhase::PostSparse, 2.0},
  };
  const auto p = tmp_path("trace.svg");
  for (bool log_scale : {false, true}) {
    io::write_trace_svg(p.string(), trace, log_scale);
    const auto bytes = slurp(p);
    const std::string text(bytes.begin(), bytes.end());
    CHECK(text.find("<svg") != std::string::npos);
    CHECK(text.find("<polyline") != std::string::npos);
    // three coordinate pairs on the line
    std::size_t commas = 0;
    const std::size_t start = text.find("points=");
    for (std::size_t i = start; i < text.size() && text[i] != '/'; ++i)
      commas += text[i] == ',';
    CHECK(commas == 3);
  }
  CHECK_THROWS_AS(io::write_trace_svg(p.string(), {}, false), ContractViolation);
}

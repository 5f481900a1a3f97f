#include "armor/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace armor {
namespace io {

namespace {

static_assert(std::endian::native == std::endian::little,
              "on-disk formats are little-endian; byte swapping not implemented");

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const char* what) {
  T v;
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw FormatError(std::string("truncated file reading ") + what);
  return v;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open for writing: " + path);
  return os;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open for reading: " + path);
  return is;
}

void expect_magic(std::istream& is, const char* magic, const std::string& path) {
  char buf[4];
  is.read(buf, 4);
  if (!is || std::memcmp(buf, magic, 4) != 0) {
    throw FormatError("bad magic in " + path + " (expected " + magic + ")");
  }
}

DenseMatrix read_csv_matrix(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open for reading: " + path);
  std::vector<double> data;
  std::size_t rows = 0, cols = 0;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t c = 0;
    while (std::getline(ss, cell, ',')) {
      data.push_back(std::stod(cell));
      ++c;
    }
    if (rows == 0) {
      cols = c;
    } else if (c != cols) {
      throw FormatError("ragged CSV row in " + path);
    }
    ++rows;
  }
  if (rows == 0) throw FormatError("empty CSV file: " + path);
  return DenseMatrix(rows, cols, std::move(data));
}

}  // namespace

void write_amf(const std::string& path, const DenseMatrix& m) {
  auto os = open_out(path);
  os.write("ARMF", 4);
  put<std::uint32_t>(os, 1);
  put<std::uint8_t>(os, 1);  // dtype: f64
  put<std::uint64_t>(os, m.rows());
  put<std::uint64_t>(os, m.cols());
  os.write(reinterpret_cast<const char*>(m.data().data()),
           static_cast<std::streamsize>(m.data().size() * sizeof(double)));
  if (!os) throw FormatError("write failed: " + path);
}

DenseMatrix read_amf(const std::string& path) {
  auto is = open_in(path);
  expect_magic(is, "ARMF", path);
  const auto version = get<std::uint32_t>(is, "version");
  if (version != 1) throw FormatError("unsupported AMF version in " + path);
  const auto dtype = get<std::uint8_t>(is, "dtype");
  if (dtype != 1) throw FormatError("unsupported AMF dtype in " + path);
  const auto rows = get<std::uint64_t>(is, "rows");
  const auto cols = get<std::uint64_t>(is, "cols");
  std::vector<double> data(rows * cols);
  is.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(data.size() * sizeof(double)));
  if (!is) throw FormatError("truncated AMF payload in " + path);
  return DenseMatrix(rows, cols, std::move(data));
}

DenseMatrix read_matrix_auto(const std::string& path) {
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv") {
    return read_csv_matrix(path);
  }
  return read_amf(path);
}

namespace {
enum SectionTag : std::uint32_t {
  kSecA = 1,
  kSecB = 2,
  kSecCoreValues = 3,
  kSecCoreIndices = 4,
  kSecR1 = 5,
  kSecR2 = 6,
};
}

void write_container(const std::string& path, const FactorizationState& state,
                     const std::vector<double>& r1,
                     const std::vector<double>& r2) {
  if (r1.empty() != r2.empty()) {
    throw ContractViolation("r1 and r2 must be written together");
  }
  if (!r1.empty() && (r1.size() != state.d_in() || r2.size() != state.d_out())) {
    throw ContractViolation("scaling vector lengths disagree with the state");
  }
  const std::size_t bs = state.block_size;
  const std::size_t groups = state.d_out() * state.d_in() / 4;

  std::vector<std::pair<std::uint32_t, std::vector<char>>> sections;
  auto add_doubles = [&](std::uint32_t tag, const std::vector<double>& v) {
    std::vector<char> bytes(v.size() * sizeof(double));
    std::memcpy(bytes.data(), v.data(), bytes.size());
    sections.emplace_back(tag, std::move(bytes));
  };

  {
    std::vector<double> a_data;
    for (std::size_t bi = 0; bi < state.a.num_blocks(); ++bi) {
      const auto& d = state.a.block(bi).data();
      a_data.insert(a_data.end(), d.begin(), d.end());
    }
    add_doubles(kSecA, a_data);
  }
  {
    std::vector<double> b_data;
    for (std::size_t bj = 0; bj < state.b.num_blocks(); ++bj) {
      const auto& d = state.b.block(bj).data();
      b_data.insert(b_data.end(), d.begin(), d.end());
    }
    add_doubles(kSecB, b_data);
  }
  {
    std::vector<double> values;
    std::vector<char> indices;
    values.reserve(2 * groups);
    indices.reserve(groups);
    for (std::size_t i = 0; i < state.d_out(); ++i) {
      for (std::size_t k = 0; k < state.d_in() / 4; ++k) {
        int i1 = -1, i2 = -1;
        for (int j = 0; j < 4; ++j) {
          if (state.core.mask_at(i, 4 * k + j)) (i1 < 0 ? i1 : i2) = j;
        }
        values.push_back(state.core.values().at(i, 4 * k + i1));
        values.push_back(state.core.values().at(i, 4 * k + i2));
        indices.push_back(static_cast<char>((i1 & 0x3) | ((i2 & 0x3) << 2)));
      }
    }
    add_doubles(kSecCoreValues, values);
    sections.emplace_back(kSecCoreIndices, std::move(indices));
  }
  if (!r1.empty()) {
    add_doubles(kSecR1, r1);
    add_doubles(kSecR2, r2);
  }

  auto os = open_out(path);
  os.write("ARMC", 4);
  put<std::uint32_t>(os, 1);
  put<std::uint64_t>(os, state.d_out());
  put<std::uint64_t>(os, state.d_in());
  put<std::uint64_t>(os, bs);
  put<std::uint64_t>(os, r1.empty() ? 0 : 1);
  put<std::uint64_t>(os, sections.size());

  // table entries: tag (u32), offset from file start (u64), length (u64)
  std::uint64_t offset = 4 + 4 + 4 * 8 + 8 + sections.size() * (4 + 8 + 8);
  for (const auto& [tag, bytes] : sections) {
    put<std::uint32_t>(os, tag);
    put<std::uint64_t>(os, offset);
    put<std::uint64_t>(os, bytes.size());
    offset += bytes.size();
  }
  for (const auto& [tag, bytes] : sections) {
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  if (!os) throw FormatError("write failed: " + path);
}

Container read_container(const std::string& path) {
  auto is = open_in(path);
  expect_magic(is, "ARMC", path);
  const auto version = get<std::uint32_t>(is, "version");
  if (version != 1) throw FormatError("unsupported container version in " + path);
  const auto d_out = get<std::uint64_t>(is, "d_out");
  const auto d_in = get<std::uint64_t>(is, "d_in");
  const auto bs = get<std::uint64_t>(is, "d_block");
  const auto has_r = get<std::uint64_t>(is, "scaling flag");
  const auto n_sections = get<std::uint64_t>(is, "section count");

  struct Entry {
    std::uint32_t tag;
    std::uint64_t offset, length;
  };
  std::vector<Entry> table(n_sections);
  for (auto& e : table) {
    e.tag = get<std::uint32_t>(is, "section tag");
    e.offset = get<std::uint64_t>(is, "section offset");
    e.length = get<std::uint64_t>(is, "section length");
  }

  auto read_section = [&](std::uint32_t tag) -> std::vector<char> {
    for (const auto& e : table) {
      if (e.tag != tag) continue;
      is.seekg(static_cast<std::streamoff>(e.offset));
      std::vector<char> bytes(e.length);
      is.read(bytes.data(), static_cast<std::streamsize>(e.length));
      if (!is) throw FormatError("truncated section in " + path);
      return bytes;
    }
    throw FormatError("missing section in " + path);
  };
  auto as_doubles = [](const std::vector<char>& bytes) {
    std::vector<double> v(bytes.size() / sizeof(double));
    std::memcpy(v.data(), bytes.data(), v.size() * sizeof(double));
    return v;
  };

  const std::size_t groups = d_out * d_in / 4;
  const auto a_data = as_doubles(read_section(kSecA));
  const auto b_data = as_doubles(read_section(kSecB));
  const auto core_values = as_doubles(read_section(kSecCoreValues));
  const auto core_indices = read_section(kSecCoreIndices);
  if (a_data.size() != d_out * bs || b_data.size() != d_in * bs ||
      core_values.size() != 2 * groups || core_indices.size() != groups) {
    throw FormatError("section sizes inconsistent with header in " + path);
  }

  auto build_bd = [&](const std::vector<double>& data, std::size_t dim) {
    std::vector<DenseMatrix> blocks;
    for (std::size_t b = 0; b < dim / bs; ++b) {
      std::vector<double> blk(data.begin() + b * bs * bs,
                              data.begin() + (b + 1) * bs * bs);
      blocks.emplace_back(bs, bs, std::move(blk));
    }
    return BlockDiagonalMatrix(dim, bs, std::move(blocks));
  };

  DenseMatrix values(d_out, d_in);
  std::vector<std::uint8_t> mask(d_out * d_in, 0);
  for (std::size_t g = 0; g < groups; ++g) {
    const int i1 = core_indices[g] & 0x3;
    const int i2 = (core_indices[g] >> 2) & 0x3;
    if (i1 >= i2) {
      throw FormatError("core index byte violates i1 < i2 in " + path);
    }
    const std::size_t row = g / (d_in / 4);
    const std::size_t col0 = 4 * (g % (d_in / 4));
    values.at(row, col0 + i1) = core_values[2 * g];
    values.at(row, col0 + i2) = core_values[2 * g + 1];
    mask[row * d_in + col0 + i1] = 1;
    mask[row * d_in + col0 + i2] = 1;
  }

  Container c{FactorizationState(build_bd(a_data, d_out), build_bd(b_data, d_in),
                                 SparseCore24(std::move(values), std::move(mask)),
                                 bs),
              {}, {}};
  if (has_r) {
    c.r1 = as_doubles(read_section(kSecR1));
    c.r2 = as_doubles(read_section(kSecR2));
    if (c.r1.size() != d_in || c.r2.size() != d_out) {
      throw FormatError("scaling vector sizes inconsistent in " + path);
    }
  }
  return c;
}

void write_trace_csv(const std::string& path, const LossTrace& trace) {
  auto os = open_out(path);
  os << "iter,phase,loss\n";
  char buf[64];
  for (const auto& p : trace) {
    std::snprintf(buf, sizeof(buf), "%.17g", p.loss);
    os << p.iteration << ',' << trace_phase_name(p.phase) << ',' << buf << '\n';
  }
  if (!os) throw FormatError("write failed: " + path);
}

LossTrace read_trace_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open for reading: " + path);
  std::string line;
  if (!std::getline(is, line) || line != "iter,phase,loss") {
    throw FormatError("bad trace CSV header in " + path);
  }
  LossTrace trace;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string iter, phase, loss;
    if (!std::getline(ss, iter, ',') || !std::getline(ss, phase, ',') ||
        !std::getline(ss, loss)) {
      throw FormatError("bad trace CSV row in " + path);
    }
    trace.push_back({static_cast<std::size_t>(std::stoull(iter)),
                     trace_phase_from_name(phase), std::stod(loss)});
  }
  return trace;
}

void write_trace_svg(const std::string& path, const LossTrace& trace,
                     bool log_scale) {
  if (trace.empty()) throw ContractViolation("cannot plot an empty trace");
  const double width = 640.0, height = 400.0, margin = 40.0;

  std::vector<double> ys;
  ys.reserve(trace.size());
  for (const auto& p : trace) {
    ys.push_back(log_scale ? std::log10(std::max(p.loss, 1e-300)) : p.loss);
  }
  const double ymin = *std::min_element(ys.begin(), ys.end());
  const double ymax = *std::max_element(ys.begin(), ys.end());
  const double yspan = (ymax > ymin) ? ymax - ymin : 1.0;
  const double xspan = trace.size() > 1 ? static_cast<double>(trace.size() - 1) : 1.0;

  auto os = open_out(path);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
     << "\" height=\"" << height << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"";
  char buf[64];
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const double x = margin + (width - 2 * margin) * static_cast<double>(i) / xspan;
    const double y = height - margin - (height - 2 * margin) * (ys[i] - ymin) / yspan;
    std::snprintf(buf, sizeof(buf), "%.3f,%.3f ", x, y);
    os << buf;
  }
  os << "\"/>\n</svg>\n";
  if (!os) throw FormatError("write failed: " + path);
}

}  // namespace io
}  // namespace armor

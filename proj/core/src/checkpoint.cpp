#include "argem/checkpoint.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "argem/error.hpp"

namespace argem {

namespace {

constexpr char kMagic[8] = {'A', 'R', 'G', 'E', 'M', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw ParseError("checkpoint truncated");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_string(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is) {
  const std::uint32_t len = read_u32(is);
  std::string s(len, '\0');
  is.read(s.data(), len);
  if (!is) throw ParseError("checkpoint truncated");
  return s;
}

void write_mat(std::ostream& os, const std::string& name, const DenseMat& m) {
  write_string(os, name);
  write_u32(os, static_cast<std::uint32_t>(m.rows));
  write_u32(os, static_cast<std::uint32_t>(m.cols));
  for (double v : m.data) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
  }
}

DenseMat read_mat(std::istream& is) {
  const int rows = static_cast<int>(read_u32(is));
  const int cols = static_cast<int>(read_u32(is));
  DenseMat m(rows, cols);
  for (double& v : m.data) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw ParseError("checkpoint truncated");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    std::memcpy(&v, &bits, 8);
  }
  return m;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for write: " + path);
  os.write(kMagic, 8);
  write_u32(os, kVersion);

  auto meta = ckpt.meta;
  meta["variant"] = to_string(ckpt.weights.variant);
  write_u32(os, static_cast<std::uint32_t>(meta.size()));
  for (const auto& [k, v] : meta) {
    write_string(os, k);
    write_string(os, v);
  }

  std::vector<std::pair<std::string, const DenseMat*>> mats;
  const ModelWeights& w = ckpt.weights;
  mats.emplace_back("enc.w0", &w.enc.w0);
  mats.emplace_back("enc.w1", &w.enc.w1);
  if (w.enc.w1_sigma.size() > 0) mats.emplace_back("enc.w1_sigma", &w.enc.w1_sigma);
  if (w.dec.kind != DecoderKind::InnerProduct) {
    mats.emplace_back("dec.wd1", &w.dec.wd1);
    mats.emplace_back("dec.wd2", &w.dec.wd2);
  }
  mats.emplace_back("disc.w1", &w.disc.w1);
  mats.emplace_back("disc.b1", &w.disc.b1);
  mats.emplace_back("disc.w2", &w.disc.w2);
  mats.emplace_back("disc.b2", &w.disc.b2);
  mats.emplace_back("disc.w3", &w.disc.w3);
  mats.emplace_back("disc.b3", &w.disc.b3);

  write_u32(os, static_cast<std::uint32_t>(mats.size()));
  for (const auto& [name, mat] : mats) write_mat(os, name, *mat);
  if (!os) throw std::runtime_error("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0) {
    throw ParseError("not an argem checkpoint: " + path);
  }
  const std::uint32_t version = read_u32(is);
  if (version != kVersion) {
    throw ParseError("unsupported checkpoint version " + std::to_string(version));
  }

  Checkpoint ckpt;
  const std::uint32_t meta_count = read_u32(is);
  for (std::uint32_t i = 0; i < meta_count; ++i) {
    std::string k = read_string(is);
    std::string v = read_string(is);
    ckpt.meta.emplace(std::move(k), std::move(v));
  }
  auto it = ckpt.meta.find("variant");
  if (it == ckpt.meta.end()) throw ParseError("checkpoint missing variant");
  ckpt.weights.variant = parse_variant(it->second);
  ckpt.weights.dec.kind = decoder_kind(ckpt.weights.variant);

  const std::uint32_t mat_count = read_u32(is);
  for (std::uint32_t i = 0; i < mat_count; ++i) {
    std::string name = read_string(is);
    DenseMat m = read_mat(is);
    ModelWeights& w = ckpt.weights;
    if (name == "enc.w0") w.enc.w0 = std::move(m);
    else if (name == "enc.w1") w.enc.w1 = std::move(m);
    else if (name == "enc.w1_sigma") w.enc.w1_sigma = std::move(m);
    else if (name == "dec.wd1") w.dec.wd1 = std::move(m);
    else if (name == "dec.wd2") w.dec.wd2 = std::move(m);
    else if (name == "disc.w1") w.disc.w1 = std::move(m);
    else if (name == "disc.b1") w.disc.b1 = std::move(m);
    else if (name == "disc.w2") w.disc.w2 = std::move(m);
    else if (name == "disc.b2") w.disc.b2 = std::move(m);
    else if (name == "disc.w3") w.disc.w3 = std::move(m);
    else if (name == "disc.b3") w.disc.b3 = std::move(m);
    else throw ParseError("unknown matrix in checkpoint: " + name);
  }
  return ckpt;
}

void save_embedding_tsv(const std::string& path, const DenseMat& z,
                        const std::vector<std::string>& node_ids) {
  check_contract(static_cast<int>(node_ids.size()) == z.rows,
                 "save_embedding_tsv: id count must equal row count");
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for write: " + path);
  char buf[64];
  for (int i = 0; i < z.rows; ++i) {
    os << node_ids[i];
    for (int j = 0; j < z.cols; ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", z(i, j));
      os << '\t' << buf;
    }
    os << '\n';
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

DenseMat load_embedding_tsv(const std::string& path,
                            std::vector<std::string>* node_ids) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open embedding file: " + path);
  std::vector<std::vector<double>> rows;
  std::vector<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::string id;
    std::size_t start = 0;
    int field = 0;
    while (start <= line.size()) {
      std::size_t tab = line.find('\t', start);
      std::string cell = line.substr(
          start, tab == std::string::npos ? std::string::npos : tab - start);
      if (field == 0) {
        id = cell;
      } else {
        try {
          std::size_t pos = 0;
          row.push_back(std::stod(cell, &pos));
          if (pos != cell.size()) throw std::invalid_argument("");
        } catch (const std::exception&) {
          throw ParseError(path + ":" + std::to_string(lineno) +
                           ": bad value '" + cell + "'");
        }
      }
      ++field;
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (row.empty()) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": no values");
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": ragged row");
    }
    ids.push_back(std::move(id));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(path + ": empty embedding file");
  DenseMat z(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
  for (int i = 0; i < z.rows; ++i) {
    std::copy(rows[i].begin(), rows[i].end(),
              z.data.begin() + static_cast<std::size_t>(i) * z.cols);
  }
  if (node_ids) *node_ids = std::move(ids);
  return z;
}

}  // namespace argem

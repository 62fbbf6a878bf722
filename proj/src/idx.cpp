#include <fstream>
#include <iterator>
#include <stdexcept>

#include "airfl/fl.hpp"

namespace airfl::fl {
namespace {

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset) {
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

}  // namespace

IdxArray read_idx(const std::filesystem::path& path, std::uint8_t expected_rank) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open IDX file " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  // Magic: two zero bytes, type 0x08 (unsigned byte), rank.
  if (bytes.size() < 4 || bytes[0] != 0 || bytes[1] != 0 || bytes[2] != 0x08 || bytes[3] != expected_rank) {
    throw std::runtime_error(path.string() + ": bad IDX magic (expected 0x000008" +
                             (expected_rank == 3 ? std::string("03") : std::string("01")) + ")");
  }
  const std::size_t header = 4 + 4 * std::size_t{expected_rank};
  if (bytes.size() < header) throw std::runtime_error(path.string() + ": truncated IDX header");
  IdxArray out;
  std::size_t count = 1;
  for (std::size_t r = 0; r < expected_rank; ++r) {
    out.dims.push_back(read_be32(bytes, 4 + 4 * r));
    count *= out.dims.back();
  }
  if (bytes.size() - header < count) {
    throw std::runtime_error(path.string() + ": truncated IDX payload (expected " + std::to_string(count) +
                             " bytes, found " + std::to_string(bytes.size() - header) + ")");
  }
  out.data.assign(bytes.begin() + static_cast<long>(header), bytes.begin() + static_cast<long>(header + count));
  return out;
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const IdxArray img = read_idx(images, 3);
  const IdxArray lab = read_idx(labels, 1);
  if (img.dims[0] != lab.dims[0]) {
    throw std::runtime_error("IDX count mismatch: " + std::to_string(img.dims[0]) + " images vs " +
                             std::to_string(lab.dims[0]) + " labels");
  }
  Dataset d;
  d.name = images.filename().string();
  d.num_features = std::size_t{img.dims[1]} * img.dims[2];
  d.num_classes = 10;
  d.features.resize(img.data.size());
  for (std::size_t i = 0; i < img.data.size(); ++i) d.features[i] = img.data[i] / 255.0;
  d.labels.reserve(lab.data.size());
  for (auto y : lab.data) {
    if (y > 9) throw std::runtime_error(labels.string() + ": label " + std::to_string(y) + " out of range");
    d.labels.push_back(y);
  }
  return d;
}

Dataset load_mnist(const std::filesystem::path& dir, bool train) {
  const std::string prefix = train ? "train" : "t10k";
  const auto images = dir / (prefix + "-images-idx3-ubyte");
  const auto labels = dir / (prefix + "-labels-idx1-ubyte");
  if (!std::filesystem::exists(images) || !std::filesystem::exists(labels)) {
    throw std::runtime_error("MNIST files not found: expected " + images.string() + " and " + labels.string());
  }
  return load_idx(images, labels);
}

}  // namespace airfl::fl

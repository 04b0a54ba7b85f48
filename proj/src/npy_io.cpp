#include "cshover/npy_io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>
#include <functional>
#include <iterator>
#include <numeric>
#include <optional>
#include <string_view>

namespace cshover::npy {

namespace {

constexpr std::uint8_t kMagic[6] = {0x93, 'N', 'U', 'M', 'P', 'Y'};
constexpr std::size_t kPreambleSize = 10;  // magic + version + u16 header_len
constexpr std::size_t kAlignment = 64;

template <typename T>
T load_le(const std::uint8_t* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
    auto* b = reinterpret_cast<std::uint8_t*>(&v);
    std::reverse(b, b + sizeof(T));
  }
  return v;
}

template <typename T>
void store_le(std::uint8_t* p, T v) {
  if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
    auto* b = reinterpret_cast<std::uint8_t*>(&v);
    std::reverse(b, b + sizeof(T));
  }
  std::memcpy(p, &v, sizeof(T));
}

std::optional<DType> parse_descr(std::string_view d) {
  if (d == "|u1" || d == "<u1" || d == "u1") return DType::U1;
  if (d == "<u2") return DType::U2;
  if (d == "<i4") return DType::I4;
  if (d == "<u4") return DType::U4;
  if (d == "<i8") return DType::I8;
  if (d == "<f4") return DType::F4;
  if (d == "<f8") return DType::F8;
  return std::nullopt;
}

// Minimal scanner for the Python dict literal in the NPY header.
class HeaderScanner {
 public:
  explicit HeaderScanner(std::string_view s) : s_(s) {}

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool consume(char c) {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expect(char c) {
    if (!consume(c)) throw NpyError("malformed NPY header dictionary");
  }
  std::string quoted() {
    skip_ws();
    if (pos_ >= s_.size() || (s_[pos_] != '\'' && s_[pos_] != '"')) {
      throw NpyError("malformed NPY header dictionary");
    }
    const char q = s_[pos_++];
    const auto end = s_.find(q, pos_);
    if (end == std::string_view::npos) throw NpyError("malformed NPY header dictionary");
    std::string out(s_.substr(pos_, end - pos_));
    pos_ = end + 1;
    return out;
  }
  std::string word() {
    skip_ws();
    const auto start = pos_;
    while (pos_ < s_.size() && std::isalpha(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    return std::string(s_.substr(start, pos_ - start));
  }
  std::size_t integer() {
    skip_ws();
    const auto start = pos_;
    while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    if (start == pos_) throw NpyError("malformed NPY shape tuple");
    std::size_t v = 0;
    for (auto i = start; i < pos_; ++i) v = v * 10 + static_cast<std::size_t>(s_[i] - '0');
    // Python 2 era writers may emit a long suffix.
    if (pos_ < s_.size() && s_[pos_] == 'L') ++pos_;
    return v;
  }

 private:
  std::string_view s_;
  std::size_t pos_ = 0;
};

struct ParsedHeader {
  DType dtype;
  std::vector<std::size_t> shape;
};

ParsedHeader parse_header_dict(std::string_view dict) {
  HeaderScanner sc(dict);
  sc.expect('{');
  std::optional<std::string> descr;
  std::optional<bool> fortran;
  std::optional<std::vector<std::size_t>> shape;
  while (!sc.consume('}')) {
    const std::string key = sc.quoted();
    sc.expect(':');
    if (key == "descr") {
      descr = sc.quoted();
    } else if (key == "fortran_order") {
      const std::string w = sc.word();
      if (w == "True") fortran = true;
      else if (w == "False") fortran = false;
      else throw NpyError("malformed fortran_order value");
    } else if (key == "shape") {
      sc.expect('(');
      std::vector<std::size_t> dims;
      while (!sc.consume(')')) {
        dims.push_back(sc.integer());
        if (!sc.consume(',')) {
          sc.expect(')');
          break;
        }
      }
      shape = std::move(dims);
    } else {
      throw NpyError("unexpected key in NPY header: " + key);
    }
    if (!sc.consume(',')) {
      sc.expect('}');
      break;
    }
  }
  if (!descr || !fortran || !shape) throw NpyError("NPY header missing required key");
  if (*fortran) throw NpyError("Fortran order unsupported");
  const auto dt = parse_descr(*descr);
  if (!dt) throw NpyError("unsupported dtype: " + *descr);
  return {*dt, std::move(*shape)};
}

std::string format_header_dict(const NpyArray& a) {
  std::string s = "{'descr': '" + dtype_descr(a.dtype()) + "', 'fortran_order': False, 'shape': (";
  const auto& shape = a.shape();
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) s += ", ";
    s += std::to_string(shape[i]);
  }
  if (shape.size() == 1) s += ",";
  s += "), }";
  return s;
}

std::size_t product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace

std::size_t dtype_size(DType t) noexcept {
  switch (t) {
    case DType::U1: return 1;
    case DType::U2: return 2;
    case DType::I4:
    case DType::U4:
    case DType::F4: return 4;
    case DType::I8:
    case DType::F8: return 8;
  }
  return 0;
}

std::string dtype_descr(DType t) {
  switch (t) {
    case DType::U1: return "|u1";
    case DType::U2: return "<u2";
    case DType::I4: return "<i4";
    case DType::U4: return "<u4";
    case DType::I8: return "<i8";
    case DType::F4: return "<f4";
    case DType::F8: return "<f8";
  }
  throw NpyError("unsupported dtype");
}

NpyArray::NpyArray(DType dtype, std::vector<std::size_t> shape, std::vector<std::uint8_t> payload)
    : dtype_(dtype), shape_(std::move(shape)), payload_(std::move(payload)) {
  if (payload_.size() != product(shape_) * dtype_size(dtype_)) {
    throw NpyError("payload length does not match shape");
  }
}

std::size_t NpyArray::element_count() const noexcept { return product(shape_); }

template <typename T>
NpyArray NpyArray::from_values(std::vector<std::size_t> shape, std::span<const T> values) {
  constexpr DType dt = dtype_of<T>();
  if (values.size() != product(shape)) throw NpyError("value count does not match shape");
  std::vector<std::uint8_t> payload(values.size() * sizeof(T));
  for (std::size_t i = 0; i < values.size(); ++i) store_le<T>(payload.data() + i * sizeof(T), values[i]);
  return NpyArray(dt, std::move(shape), std::move(payload));
}

template <typename T>
T NpyArray::value(std::size_t i) const {
  const std::uint8_t* p = payload_.data() + i * dtype_size(dtype_);
  switch (dtype_) {
    case DType::U1: return static_cast<T>(*p);
    case DType::U2: return static_cast<T>(load_le<std::uint16_t>(p));
    case DType::I4: return static_cast<T>(load_le<std::int32_t>(p));
    case DType::U4: return static_cast<T>(load_le<std::uint32_t>(p));
    case DType::I8: return static_cast<T>(load_le<std::int64_t>(p));
    case DType::F4: return static_cast<T>(load_le<float>(p));
    case DType::F8: return static_cast<T>(load_le<double>(p));
  }
  return T{};
}

template <typename T>
std::vector<T> NpyArray::values() const {
  std::vector<T> out(element_count());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = value<T>(i);
  return out;
}

#define CSHOVER_NPY_INSTANTIATE(T)                                                          \
  template NpyArray NpyArray::from_values<T>(std::vector<std::size_t>, std::span<const T>); \
  template T NpyArray::value<T>(std::size_t) const;                                         \
  template std::vector<T> NpyArray::values<T>() const;

CSHOVER_NPY_INSTANTIATE(std::uint8_t)
CSHOVER_NPY_INSTANTIATE(std::uint16_t)
CSHOVER_NPY_INSTANTIATE(std::int32_t)
CSHOVER_NPY_INSTANTIATE(std::uint32_t)
CSHOVER_NPY_INSTANTIATE(std::int64_t)
CSHOVER_NPY_INSTANTIATE(float)
CSHOVER_NPY_INSTANTIATE(double)
#undef CSHOVER_NPY_INSTANTIATE

NpyArray read_npy(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kPreambleSize || !std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) {
    throw NpyError("bad NPY magic");
  }
  if (bytes[6] != 1 || bytes[7] != 0) {
    throw NpyError("unsupported NPY version " + std::to_string(bytes[6]) + "." +
                   std::to_string(bytes[7]));
  }
  const std::size_t header_len = load_le<std::uint16_t>(bytes.data() + 8);
  if (bytes.size() < kPreambleSize + header_len) throw NpyError("truncated NPY header");
  const std::string_view dict(reinterpret_cast<const char*>(bytes.data() + kPreambleSize), header_len);
  if (dict.empty() || dict.back() != '\n') throw NpyError("NPY header not newline terminated");

  ParsedHeader hdr = parse_header_dict(dict);
  const std::size_t offset = kPreambleSize + header_len;
  const std::size_t expected = product(hdr.shape) * dtype_size(hdr.dtype);
  const std::size_t available = bytes.size() - offset;
  if (available < expected) throw NpyError("truncated NPY payload");
  if (available > expected) throw NpyError("trailing bytes after NPY payload");
  std::vector<std::uint8_t> payload(bytes.begin() + static_cast<std::ptrdiff_t>(offset), bytes.end());
  return NpyArray(hdr.dtype, std::move(hdr.shape), std::move(payload));
}

std::vector<std::uint8_t> write_npy(const NpyArray& array) {
  std::string dict = format_header_dict(array);
  // Pad with spaces so preamble + dict + '\n' is a multiple of the alignment.
  const std::size_t unpadded = kPreambleSize + dict.size() + 1;
  const std::size_t padding = (kAlignment - unpadded % kAlignment) % kAlignment;
  dict.append(padding, ' ');
  dict.push_back('\n');
  if (dict.size() > 0xFFFF) throw NpyError("NPY header too long for version 1.0");

  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  out.reserve(kPreambleSize + dict.size() + array.payload().size());
  out.push_back(1);
  out.push_back(0);
  out.push_back(static_cast<std::uint8_t>(dict.size() & 0xFF));
  out.push_back(static_cast<std::uint8_t>(dict.size() >> 8));
  out.insert(out.end(), dict.begin(), dict.end());
  out.insert(out.end(), array.payload().begin(), array.payload().end());
  return out;
}

NpyArray load_npy(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NpyError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return read_npy(bytes);
  } catch (const NpyError& e) {
    throw NpyError(path.string() + ": " + e.what());
  }
}

void save_npy(const std::filesystem::path& path, const NpyArray& array) {
  const auto bytes = write_npy(array);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw NpyError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw NpyError("write failed: " + path.string());
}

template <typename T>
NpyArray stack_images(std::span<const Image<T>> images) {
  if (images.empty()) {
    return NpyArray::from_values<T>({0, 0, 0, 1}, std::span<const T>());
  }
  const auto& first = images.front();
  std::vector<T> all;
  all.reserve(images.size() * first.data().size());
  for (const auto& img : images) {
    if (!img.same_shape(first)) throw InvalidArgument("stack_images: inconsistent image shapes");
    all.insert(all.end(), img.data().begin(), img.data().end());
  }
  return NpyArray::from_values<T>(
      {images.size(), static_cast<std::size_t>(first.height()), static_cast<std::size_t>(first.width()),
       static_cast<std::size_t>(first.channels())},
      std::span<const T>(all));
}

template NpyArray stack_images<std::uint8_t>(std::span<const Image<std::uint8_t>>);
template NpyArray stack_images<float>(std::span<const Image<float>>);
template NpyArray stack_images<double>(std::span<const Image<double>>);

NpyArray stack_labels(std::span<const InstanceMap> instances, std::span<const ClassMap> classes) {
  if (instances.size() != classes.size()) throw InvalidArgument("sample count mismatch");
  const std::size_t n = instances.size();
  const std::size_t h = n ? instances.front().height() : 0;
  const std::size_t w = n ? instances.front().width() : 0;
  std::vector<std::int32_t> all;
  all.reserve(n * h * w * 2);
  for (std::size_t s = 0; s < n; ++s) {
    const auto& inst = instances[s];
    const auto& cls = classes[s];
    if (static_cast<std::size_t>(inst.height()) != h || static_cast<std::size_t>(inst.width()) != w ||
        !inst.same_extent(cls)) {
      throw InvalidArgument("stack_labels: inconsistent label shapes");
    }
    for (std::size_t i = 0; i < inst.pixel_count(); ++i) {
      if (inst[i] > static_cast<std::uint32_t>(INT32_MAX)) throw InvalidArgument("instance id exceeds int32");
      all.push_back(static_cast<std::int32_t>(inst[i]));
      all.push_back(static_cast<std::int32_t>(cls[i]));
    }
  }
  return NpyArray::from_values<std::int32_t>({n, h, w, 2}, std::span<const std::int32_t>(all));
}

namespace {

bool is_integer_dtype(DType t) {
  return t == DType::U1 || t == DType::U2 || t == DType::I4 || t == DType::U4 || t == DType::I8;
}

void check_label_array(const NpyArray& labels) {
  const auto& s = labels.shape();
  if (s.size() != 4 || s[3] != 2) throw NpyError("labels must have shape (N, H, W, 2)");
  if (!is_integer_dtype(labels.dtype())) throw NpyError("labels must have an integer dtype");
}

}  // namespace

void split_label_sample(const NpyArray& labels, std::size_t index, InstanceMap& instances,
                        ClassMap& classes) {
  check_label_array(labels);
  const auto& s = labels.shape();
  if (index >= s[0]) throw InvalidArgument("sample index out of bounds");
  const int h = static_cast<int>(s[1]);
  const int w = static_cast<int>(s[2]);
  instances = InstanceMap(h, w, 1);
  classes = ClassMap(h, w, 1);
  const std::size_t base = index * static_cast<std::size_t>(h) * w * 2;
  for (std::size_t i = 0; i < instances.pixel_count(); ++i) {
    const auto id = labels.value<std::int64_t>(base + 2 * i);
    const auto cls = labels.value<std::int64_t>(base + 2 * i + 1);
    if (id < 0 || id > static_cast<std::int64_t>(UINT32_MAX)) throw NpyError("instance id out of range");
    if (cls < 0 || cls > kNumClasses) throw NpyError("class id out of range");
    instances[i] = static_cast<std::uint32_t>(id);
    classes[i] = static_cast<ClassId>(cls);
  }
}

DatasetHandle::DatasetHandle(NpyArray images, NpyArray labels)
    : images_(std::move(images)), labels_(std::move(labels)) {
  const auto& is = images_.shape();
  if (is.size() != 4 || is[3] != 3 || images_.dtype() != DType::U1) {
    throw NpyError("images must be (N, H, W, 3) uint8");
  }
  check_label_array(labels_);
  const auto& ls = labels_.shape();
  if (is[0] != ls[0]) throw NpyError("sample count mismatch");
  if (is[1] != ls[1] || is[2] != ls[2]) throw NpyError("image/label extent mismatch");
  n_ = is[0];
  h_ = static_cast<int>(is[1]);
  w_ = static_cast<int>(is[2]);
  const std::size_t count = labels_.element_count();
  for (std::size_t i = 0; i < count; i += 2) {
    const auto id = labels_.value<std::int64_t>(i);
    const auto cls = labels_.value<std::int64_t>(i + 1);
    if (id < 0 || id > static_cast<std::int64_t>(UINT32_MAX)) throw NpyError("instance id out of range");
    if (cls < 0 || cls > kNumClasses) throw NpyError("class id out of range");
  }
}

void DatasetHandle::check_index(std::size_t index) const {
  if (index >= n_) throw InvalidArgument("sample index out of bounds");
}

ImageU8 DatasetHandle::image(std::size_t index) const {
  check_index(index);
  const std::size_t len = static_cast<std::size_t>(h_) * w_ * 3;
  const auto first = images_.payload().begin() + static_cast<std::ptrdiff_t>(index * len);
  return ImageU8(h_, w_, 3, std::vector<std::uint8_t>(first, first + static_cast<std::ptrdiff_t>(len)));
}

InstanceMap DatasetHandle::instances(std::size_t index) const { return sample(index).instances; }

ClassMap DatasetHandle::classes(std::size_t index) const { return sample(index).classes; }

Sample DatasetHandle::sample(std::size_t index) const {
  Sample s;
  s.image = image(index);
  split_label_sample(labels_, index, s.instances, s.classes);
  return s;
}

DatasetHandle load_dataset(const std::filesystem::path& images_path,
                           const std::filesystem::path& labels_path) {
  return DatasetHandle(load_npy(images_path), load_npy(labels_path));
}

}  // namespace cshover::npy

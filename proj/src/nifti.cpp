#include "nph/nifti.hpp"

#include "nph/errors.hpp"

#include <zlib.h>

#include <cstring>
#include <string>
#include <vector>

namespace nph {
namespace {

#pragma pack(push, 1)
struct Nifti1Header {
  std::int32_t sizeof_hdr;  // must be 348
  char data_type[10];
  char db_name[18];
  std::int32_t extents;
  std::int16_t session_error;
  char regular;
  char dim_info;
  std::int16_t dim[8];
  float intent_p1, intent_p2, intent_p3;
  std::int16_t intent_code;
  std::int16_t datatype;
  std::int16_t bitpix;
  std::int16_t slice_start;
  float pixdim[8];
  float vox_offset;
  float scl_slope;
  float scl_inter;
  std::int16_t slice_end;
  char slice_code;
  char xyzt_units;
  float cal_max, cal_min;
  float slice_duration;
  float toffset;
  std::int32_t glmax, glmin;
  char descrip[80];
  char aux_file[24];
  std::int16_t qform_code;
  std::int16_t sform_code;
  float quatern_b, quatern_c, quatern_d;
  float qoffset_x, qoffset_y, qoffset_z;
  float srow_x[4];
  float srow_y[4];
  float srow_z[4];
  char intent_name[16];
  char magic[4];
};
#pragma pack(pop)

static_assert(sizeof(Nifti1Header) == 348, "NIfTI-1 header must be 348 bytes");

enum DataTypeCode : std::int16_t {
  DT_UINT8 = 2,
  DT_INT16 = 4,
  DT_INT32 = 8,
  DT_FLOAT32 = 16,
  DT_FLOAT64 = 64,
  DT_INT8 = 256,
  DT_UINT16 = 512,
};

void swap_bytes(void* p, std::size_t size) {
  auto* b = static_cast<unsigned char*>(p);
  for (std::size_t i = 0; i < size / 2; ++i) std::swap(b[i], b[size - 1 - i]);
}

template <typename T>
void swap_value(T& v) {
  swap_bytes(&v, sizeof(T));
}

void swap_header(Nifti1Header& h) {
  swap_value(h.sizeof_hdr);
  swap_value(h.extents);
  swap_value(h.session_error);
  for (auto& d : h.dim) swap_value(d);
  swap_value(h.intent_p1);
  swap_value(h.intent_p2);
  swap_value(h.intent_p3);
  swap_value(h.intent_code);
  swap_value(h.datatype);
  swap_value(h.bitpix);
  swap_value(h.slice_start);
  for (auto& p : h.pixdim) swap_value(p);
  swap_value(h.vox_offset);
  swap_value(h.scl_slope);
  swap_value(h.scl_inter);
  swap_value(h.slice_end);
  swap_value(h.cal_max);
  swap_value(h.cal_min);
  swap_value(h.slice_duration);
  swap_value(h.toffset);
  swap_value(h.glmax);
  swap_value(h.glmin);
  swap_value(h.qform_code);
  swap_value(h.sform_code);
  swap_value(h.quatern_b);
  swap_value(h.quatern_c);
  swap_value(h.quatern_d);
  swap_value(h.qoffset_x);
  swap_value(h.qoffset_y);
  swap_value(h.qoffset_z);
  for (auto& v : h.srow_x) swap_value(v);
  for (auto& v : h.srow_y) swap_value(v);
  for (auto& v : h.srow_z) swap_value(v);
}

// gzread handles both gzip-compressed and plain files transparently.
class GzReader {
public:
  explicit GzReader(const std::filesystem::path& path) : path_(path.string()) {
    file_ = gzopen(path_.c_str(), "rb");
    if (!file_) throw IoError("cannot open file for reading: " + path_);
  }
  ~GzReader() {
    if (file_) gzclose(file_);
  }
  GzReader(const GzReader&) = delete;
  GzReader& operator=(const GzReader&) = delete;

  void read(void* dst, std::size_t bytes) {
    auto* p = static_cast<unsigned char*>(dst);
    while (bytes > 0) {
      unsigned chunk = bytes > (1u << 30) ? (1u << 30) : unsigned(bytes);
      int got = gzread(file_, p, chunk);
      if (got <= 0) throw IoError("truncated or unreadable file: " + path_);
      p += got;
      bytes -= std::size_t(got);
    }
  }

  void skip(std::size_t bytes) {
    std::vector<unsigned char> buf(std::min<std::size_t>(bytes, 65536));
    while (bytes > 0) {
      std::size_t chunk = std::min(bytes, buf.size());
      read(buf.data(), chunk);
      bytes -= chunk;
    }
  }

private:
  std::string path_;
  gzFile file_ = nullptr;
};

struct ParsedHeader {
  Nifti1Header h;
  bool swapped = false;
  Dims3 dims;
  Eigen::Vector3d spacing;
  AffineTransform pose;
};

AffineTransform pose_from_header(const Nifti1Header& h, const Eigen::Vector3d& spacing) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  if (h.sform_code > 0) {
    for (int c = 0; c < 4; ++c) {
      m(0, c) = h.srow_x[c];
      m(1, c) = h.srow_y[c];
      m(2, c) = h.srow_z[c];
    }
  } else if (h.qform_code > 0) {
    const double b = h.quatern_b, c = h.quatern_c, d = h.quatern_d;
    double a2 = 1.0 - (b * b + c * c + d * d);
    const double a = a2 > 0.0 ? std::sqrt(a2) : 0.0;
    Eigen::Matrix3d r;
    r << a * a + b * b - c * c - d * d, 2 * b * c - 2 * a * d, 2 * b * d + 2 * a * c,
        2 * b * c + 2 * a * d, a * a + c * c - b * b - d * d, 2 * c * d - 2 * a * b,
        2 * b * d - 2 * a * c, 2 * c * d + 2 * a * b, a * a + d * d - b * b - c * c;
    const double qfac = h.pixdim[0] < 0.0f ? -1.0 : 1.0;
    m.block<3, 3>(0, 0) = r * Eigen::Vector3d(spacing.x(), spacing.y(), qfac * spacing.z()).asDiagonal();
    m(0, 3) = h.qoffset_x;
    m(1, 3) = h.qoffset_y;
    m(2, 3) = h.qoffset_z;
  } else {
    m(0, 0) = spacing.x();
    m(1, 1) = spacing.y();
    m(2, 2) = spacing.z();
  }
  return AffineTransform(m);
}

ParsedHeader read_header(GzReader& in, const std::filesystem::path& path) {
  ParsedHeader p;
  in.read(&p.h, sizeof(Nifti1Header));
  if (p.h.sizeof_hdr != 348) {
    swap_header(p.h);
    p.swapped = true;
    if (p.h.sizeof_hdr != 348)
      throw IoError("not a NIfTI-1 file (bad sizeof_hdr): " + path.string());
  }
  if (std::strncmp(p.h.magic, "n+1", 3) != 0 && std::strncmp(p.h.magic, "ni1", 3) != 0)
    throw IoError("not a NIfTI-1 file (bad magic): " + path.string());

  const int nd = p.h.dim[0];
  bool is_3d = nd == 3;
  if (nd > 3) {
    is_3d = true;
    for (int i = 4; i <= nd; ++i) is_3d = is_3d && p.h.dim[i] <= 1;
  }
  if (!is_3d)
    throw IoError("not a 3-D image (header field dim[0]=" + std::to_string(nd) + "): " + path.string());

  for (int i = 1; i <= 3; ++i) {
    if (p.h.dim[i] < 1)
      throw IoError("non-positive header field dim[" + std::to_string(i) + "]: " + path.string());
    if (!(p.h.pixdim[i] > 0.0f))
      throw IoError("zero or negative header field pixdim[" + std::to_string(i) + "]: " + path.string());
  }
  p.dims = {p.h.dim[1], p.h.dim[2], p.h.dim[3]};
  p.spacing = Eigen::Vector3d(p.h.pixdim[1], p.h.pixdim[2], p.h.pixdim[3]);
  p.pose = pose_from_header(p.h, p.spacing);

  // header is followed by the extension flag and optional extensions
  const std::size_t offset = p.h.vox_offset >= 352.0f ? std::size_t(p.h.vox_offset) : 352;
  in.skip(offset - sizeof(Nifti1Header));
  return p;
}

template <typename Raw, typename Out>
void read_cast(GzReader& in, bool swapped, std::int64_t n, Eigen::Array<Out, Eigen::Dynamic, 1>& out) {
  std::vector<Raw> raw(static_cast<std::size_t>(n));
  in.read(raw.data(), std::size_t(n) * sizeof(Raw));
  if (swapped && sizeof(Raw) > 1)
    for (auto& v : raw) swap_value(v);
  out.resize(n);
  for (std::int64_t i = 0; i < n; ++i) out[i] = Out(raw[std::size_t(i)]);
}

template <typename Out>
Eigen::Array<Out, Eigen::Dynamic, 1> read_voxels(GzReader& in, const ParsedHeader& p,
                                                 const std::filesystem::path& path) {
  const std::int64_t n = std::int64_t(p.dims[0]) * p.dims[1] * p.dims[2];
  Eigen::Array<Out, Eigen::Dynamic, 1> out;
  switch (p.h.datatype) {
    case DT_UINT8:
      read_cast<std::uint8_t>(in, p.swapped, n, out);
      break;
    case DT_INT8:
      read_cast<std::int8_t>(in, p.swapped, n, out);
      break;
    case DT_INT16:
      read_cast<std::int16_t>(in, p.swapped, n, out);
      break;
    case DT_UINT16:
      read_cast<std::uint16_t>(in, p.swapped, n, out);
      break;
    case DT_INT32:
      read_cast<std::int32_t>(in, p.swapped, n, out);
      break;
    case DT_FLOAT32:
      read_cast<float>(in, p.swapped, n, out);
      break;
    case DT_FLOAT64:
      read_cast<double>(in, p.swapped, n, out);
      break;
    default:
      throw IoError("unsupported NIfTI datatype " + std::to_string(p.h.datatype) + ": " + path.string());
  }
  return out;
}

bool gz_path(const std::filesystem::path& path) {
  return path.extension() == ".gz";
}

class Writer {
public:
  Writer(const std::filesystem::path& path, bool compressed) : path_(path.string()), gz_(compressed) {
    if (gz_) {
      gzfile_ = gzopen(path_.c_str(), "wb6");
      if (!gzfile_) throw IoError("cannot open file for writing: " + path_);
    } else {
      file_ = std::fopen(path_.c_str(), "wb");
      if (!file_) throw IoError("cannot open file for writing: " + path_);
    }
  }
  ~Writer() { close_quiet(); }
  Writer(const Writer&) = delete;
  Writer& operator=(const Writer&) = delete;

  void write(const void* src, std::size_t bytes) {
    bool ok;
    if (gz_)
      ok = gzwrite(gzfile_, src, unsigned(bytes)) == int(bytes);
    else
      ok = std::fwrite(src, 1, bytes, file_) == bytes;
    if (!ok) throw IoError("write failed: " + path_);
  }

  void close() {
    if (gz_ && gzfile_) {
      int rc = gzclose(gzfile_);
      gzfile_ = nullptr;
      if (rc != Z_OK) throw IoError("write failed on close: " + path_);
    } else if (file_) {
      int rc = std::fclose(file_);
      file_ = nullptr;
      if (rc != 0) throw IoError("write failed on close: " + path_);
    }
  }

private:
  void close_quiet() {
    if (gz_ && gzfile_) gzclose(gzfile_);
    if (!gz_ && file_) std::fclose(file_);
    gzfile_ = nullptr;
    file_ = nullptr;
  }

  std::string path_;
  bool gz_;
  gzFile gzfile_ = nullptr;
  std::FILE* file_ = nullptr;
};

Nifti1Header make_header(const GridGeometry& geom, std::int16_t datatype, std::int16_t bitpix) {
  Nifti1Header h;
  std::memset(&h, 0, sizeof(h));
  h.sizeof_hdr = 348;
  h.dim[0] = 3;
  h.dim[1] = std::int16_t(geom.dims[0]);
  h.dim[2] = std::int16_t(geom.dims[1]);
  h.dim[3] = std::int16_t(geom.dims[2]);
  for (int i = 4; i < 8; ++i) h.dim[i] = 1;
  h.datatype = datatype;
  h.bitpix = bitpix;
  h.pixdim[0] = 1.0f;
  h.pixdim[1] = float(geom.spacing.x());
  h.pixdim[2] = float(geom.spacing.y());
  h.pixdim[3] = float(geom.spacing.z());
  h.vox_offset = 352.0f;
  h.scl_slope = 1.0f;
  h.scl_inter = 0.0f;
  h.sform_code = 1;
  h.qform_code = 0;
  const Eigen::Matrix4d& m = geom.pose.matrix();
  for (int c = 0; c < 4; ++c) {
    h.srow_x[c] = float(m(0, c));
    h.srow_y[c] = float(m(1, c));
    h.srow_z[c] = float(m(2, c));
  }
  std::memcpy(h.magic, "n+1", 4);
  return h;
}

template <typename T>
void save_impl(const Volume<T>& volume, const std::filesystem::path& path, std::int16_t datatype) {
  Writer out(path, gz_path(path));
  Nifti1Header h = make_header(volume.geometry(), datatype, std::int16_t(8 * sizeof(T)));
  out.write(&h, sizeof(h));
  const char pad[4] = {0, 0, 0, 0};  // extension flag: none
  out.write(pad, 4);
  out.write(volume.data().data(), std::size_t(volume.size()) * sizeof(T));
  out.close();
}

}  // namespace

ScalarVolume load_volume(const std::filesystem::path& path) {
  GzReader in(path);
  ParsedHeader p = read_header(in, path);
  auto data = read_voxels<float>(in, p, path);
  // scl_slope == 0 means "no scaling" per the NIfTI-1 convention
  if (p.h.scl_slope != 0.0f && (p.h.scl_slope != 1.0f || p.h.scl_inter != 0.0f))
    data = data * p.h.scl_slope + p.h.scl_inter;
  return ScalarVolume(GridGeometry{p.dims, p.spacing, p.pose}, std::move(data));
}

LabelVolume load_label_volume(const std::filesystem::path& path) {
  GzReader in(path);
  ParsedHeader p = read_header(in, path);
  switch (p.h.datatype) {
    case DT_UINT8:
    case DT_INT8:
    case DT_INT16:
    case DT_UINT16:
    case DT_INT32:
      break;
    default:
      throw IoError("label volume requires an integral datatype: " + path.string());
  }
  auto wide = read_voxels<std::int32_t>(in, p, path);
  Eigen::Array<std::uint8_t, Eigen::Dynamic, 1> data(wide.size());
  for (std::int64_t i = 0; i < wide.size(); ++i) {
    if (wide[i] < 0 || wide[i] > 255)
      throw IoError("label value out of u8 range: " + path.string());
    data[i] = std::uint8_t(wide[i]);
  }
  return LabelVolume(GridGeometry{p.dims, p.spacing, p.pose}, std::move(data));
}

void save_volume(const ScalarVolume& volume, const std::filesystem::path& path) {
  save_impl(volume, path, DT_FLOAT32);
}

void save_volume(const LabelVolume& volume, const std::filesystem::path& path) {
  save_impl(volume, path, DT_UINT8);
}

}  // namespace nph

#include "softki/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace softki {

const char* to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kSoftKI:
      return "softki";
    case ModelKind::kSGPR:
      return "sgpr";
    case ModelKind::kExact:
      return "exact";
  }
  return "?";
}

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "softki") return ModelKind::kSoftKI;
  if (s == "sgpr") return ModelKind::kSGPR;
  if (s == "exact") return ModelKind::kExact;
  throw InvalidArgument("unknown model '" + s + "'");
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_vec(const DenseVector& v) {
  std::string s;
  for (Index i = 0; i < v.size(); ++i) {
    if (i) s += ' ';
    s += fmt(v(i));
  }
  return s;
}

void put_u64(std::string& out, std::uint64_t v) {
  char b[8];
  std::memcpy(b, &v, 8);
  out.append(b, 8);
}

void put_array(std::string& out, const DenseMatrix& a) {
  put_u64(out, std::uint64_t(a.size()));
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      const double v = a(i, j);
      char b[8];
      std::memcpy(b, &v, 8);
      out.append(b, 8);
    }
  }
}

struct Reader {
  const std::string& data;
  std::size_t pos = 0;

  std::uint64_t u64() {
    if (pos + 8 > data.size()) throw ChecksumOrVersionMismatch("truncated checkpoint");
    std::uint64_t v;
    std::memcpy(&v, data.data() + pos, 8);
    pos += 8;
    return v;
  }
  DenseMatrix array(Index rows, Index cols, const char* what) {
    const std::uint64_t count = u64();
    if (count != std::uint64_t(rows * cols)) {
      throw ChecksumOrVersionMismatch(std::string("checkpoint array '") + what +
                                      "' has unexpected length");
    }
    DenseMatrix a(rows, cols);
    for (Index i = 0; i < rows; ++i) {
      for (Index j = 0; j < cols; ++j) {
        if (pos + 8 > data.size()) throw ChecksumOrVersionMismatch("truncated checkpoint");
        double v;
        std::memcpy(&v, data.data() + pos, 8);
        pos += 8;
        a(i, j) = v;
      }
    }
    return a;
  }
};

DenseVector parse_vec(const std::string& s, Index expected) {
  std::istringstream in(s);
  DenseVector v(expected);
  for (Index i = 0; i < expected; ++i) {
    if (!(in >> v(i))) throw ChecksumOrVersionMismatch("bad statistics in header");
  }
  return v;
}

}  // namespace

void write_checkpoint(const std::string& path, const Checkpoint& ck) {
  const Index m = ck.m();
  const Index d = ck.d();
  std::string payload;
  put_array(payload, ck.z);
  put_array(payload, ck.temperature);
  put_array(payload, ck.lengthscales);
  put_array(payload, ck.uzz);
  put_array(payload, ck.r);
  put_array(payload, ck.alpha);

  std::ostringstream h;
  h << "magic " << kCheckpointMagic << "\n"
    << "version " << kCheckpointVersion << "\n"
    << "model " << to_string(ck.model) << "\n"
    << "n " << ck.n << "\n"
    << "m " << m << "\n"
    << "d " << d << "\n"
    << "x_mean " << fmt_vec(ck.stats.x_mean) << "\n"
    << "x_std " << fmt_vec(ck.stats.x_std) << "\n"
    << "y_mean " << fmt(ck.stats.y_mean) << "\n"
    << "y_std " << fmt(ck.stats.y_std) << "\n"
    << "noise " << fmt(ck.noise) << "\n"
    << "outputscale " << fmt(ck.outputscale) << "\n"
    << "jitter " << fmt(ck.jitter) << "\n"
    << "r_rows " << ck.r.rows() << "\n"
    << "checksum " << std::hex << fnv1a(payload) << std::dec << "\n"
    << "end_header\n";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FileNotFound("cannot write checkpoint: " + path);
  const std::string header = h.str();
  out.write(header.data(), std::streamsize(header.size()));
  out.write(payload.data(), std::streamsize(payload.size()));
  if (!out) throw InvalidArgument("failed writing checkpoint: " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileNotFound("file not found: " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  bool ended = false;
  while (std::getline(in, line)) {
    if (line == "end_header") {
      ended = true;
      break;
    }
    const auto sp = line.find(' ');
    if (sp == std::string::npos) throw ChecksumOrVersionMismatch("malformed header line");
    kv[line.substr(0, sp)] = line.substr(sp + 1);
    if (kv.size() == 1 && kv.begin()->second != kCheckpointMagic) {
      throw ChecksumOrVersionMismatch("not a checkpoint file: " + path);
    }
  }
  if (!ended) throw ChecksumOrVersionMismatch("checkpoint header is incomplete");
  const auto get = [&](const char* key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) {
      throw ChecksumOrVersionMismatch(std::string("checkpoint header lacks '") +
                                      key + "'");
    }
    return it->second;
  };
  if (get("magic") != kCheckpointMagic) {
    throw ChecksumOrVersionMismatch("not a checkpoint file: " + path);
  }
  if (std::stoi(get("version")) != kCheckpointVersion) {
    throw ChecksumOrVersionMismatch("unsupported checkpoint version " + get("version"));
  }
  std::string payload((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  std::ostringstream sum;
  sum << std::hex << fnv1a(payload);
  if (sum.str() != get("checksum")) {
    throw ChecksumOrVersionMismatch("checkpoint checksum mismatch");
  }

  Checkpoint ck;
  ck.model = model_kind_from_string(get("model"));
  ck.n = std::stoll(get("n"));
  const Index m = std::stoll(get("m"));
  const Index d = std::stoll(get("d"));
  const Index r_rows = std::stoll(get("r_rows"));
  ck.stats.x_mean = parse_vec(get("x_mean"), d);
  ck.stats.x_std = parse_vec(get("x_std"), d);
  ck.stats.y_mean = std::stod(get("y_mean"));
  ck.stats.y_std = std::stod(get("y_std"));
  ck.noise = std::stod(get("noise"));
  ck.outputscale = std::stod(get("outputscale"));
  ck.jitter = std::stod(get("jitter"));

  Reader rd{payload};
  ck.z = rd.array(m, d, "z");
  const Index t_len = ck.model == ModelKind::kSoftKI ? d : 0;
  ck.temperature = rd.array(t_len, 1, "T");
  ck.lengthscales = rd.array(d, 1, "lengthscales");
  ck.uzz = rd.array(m, m, "U_zz");
  ck.r = rd.array(r_rows, r_rows, "R");
  ck.alpha = rd.array(m, 1, "alpha");
  if (rd.pos != payload.size()) {
    throw ChecksumOrVersionMismatch("trailing bytes after checkpoint payload");
  }
  return ck;
}

Checkpoint make_checkpoint(const FittedPosterior& post, Index n,
                           const Standardization& stats) {
  Checkpoint ck;
  ck.model = ModelKind::kSoftKI;
  ck.n = n;
  ck.stats = stats;
  ck.noise = post.theta.noise;
  ck.outputscale = post.theta.kernel.outputscale;
  ck.jitter = post.jitter;
  ck.z = post.theta.interp.z;
  ck.temperature = post.theta.interp.temperature;
  ck.lengthscales = post.theta.kernel.lengthscales;
  ck.uzz = post.uzz.matrix();
  ck.r = post.r.matrix();
  ck.alpha = post.alpha;
  return ck;
}

Checkpoint make_checkpoint(const SGPRPosterior& post, Index n,
                           const Standardization& stats) {
  Checkpoint ck;
  ck.model = ModelKind::kSGPR;
  ck.n = n;
  ck.stats = stats;
  ck.noise = post.theta.noise;
  ck.outputscale = post.theta.kernel.outputscale;
  ck.jitter = post.jitter;
  ck.z = post.theta.z;
  ck.temperature.resize(0);
  ck.lengthscales = post.theta.kernel.lengthscales;
  ck.uzz = post.uzz.matrix();
  if (post.solver == SolverKind::kQR) {
    ck.r = post.r.matrix();
  } else {
    try {
      ck.r = linalg::cholesky_upper<double>(post.c, {0.0}).factor.matrix();
    } catch (const NotPositiveDefinite&) {
      ck.r.resize(0, 0);
    }
  }
  ck.alpha = post.alpha;
  return ck;
}

Checkpoint make_checkpoint(const ExactGPPosterior& post,
                           const Standardization& stats) {
  Checkpoint ck;
  ck.model = ModelKind::kExact;
  ck.n = post.x.rows();
  ck.stats = stats;
  ck.noise = post.theta.noise;
  ck.outputscale = post.theta.kernel.outputscale;
  ck.z = post.x;
  ck.lengthscales = post.theta.kernel.lengthscales;
  ck.uzz = post.u.matrix();
  ck.r.resize(0, 0);
  ck.alpha = post.alpha;
  return ck;
}

Prediction predict(const Checkpoint& ck, const DenseMatrix& xs) {
  if (xs.cols() != ck.d()) {
    throw DimensionMismatch("checkpoint expects " + std::to_string(ck.d()) +
                            " input dims, data has " + std::to_string(xs.cols()));
  }
  Prediction p;
  switch (ck.model) {
    case ModelKind::kSoftKI: {
      FittedPosterior post;
      post.theta.noise = ck.noise;
      post.theta.kernel.outputscale = ck.outputscale;
      post.theta.kernel.lengthscales = ck.lengthscales;
      post.theta.interp.z = ck.z;
      post.theta.interp.temperature = ck.temperature;
      post.uzz = linalg::UpperTriangular<double>(ck.uzz);
      post.r = linalg::UpperTriangular<double>(ck.r);
      post.alpha = ck.alpha;
      p.mean = predict_mean(post, xs);
      if (ck.r.rows() == ck.m()) p.var = predict_var(post, xs);
      break;
    }
    case ModelKind::kSGPR: {
      SGPRPosterior post;
      post.theta.noise = ck.noise;
      post.theta.kernel.outputscale = ck.outputscale;
      post.theta.kernel.lengthscales = ck.lengthscales;
      post.theta.z = ck.z;
      post.solver = SolverKind::kQR;
      post.uzz = linalg::UpperTriangular<double>(ck.uzz);
      post.r = linalg::UpperTriangular<double>(ck.r);
      post.alpha = ck.alpha;
      p.mean = sgpr_predict_mean(post, xs);
      if (ck.r.rows() == ck.m()) p.var = sgpr_predict_var(post, xs);
      break;
    }
    case ModelKind::kExact: {
      ExactGPPosterior post;
      post.theta.noise = ck.noise;
      post.theta.kernel.outputscale = ck.outputscale;
      post.theta.kernel.lengthscales = ck.lengthscales;
      post.x = ck.z;
      post.u = linalg::UpperTriangular<double>(ck.uzz);
      post.alpha = ck.alpha;
      p.mean = exact_gp_predict_mean(post, xs);
      p.var = exact_gp_predict_var(post, xs);
      break;
    }
  }
  return p;
}

}  // namespace softki

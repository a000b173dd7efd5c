#include "tcast/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace tcast::nn {

namespace {

constexpr char kMagic[8] = {'T', 'C', 'A', 'S', 'T', 'C', 'K', 'P'};

class Writer {
public:
    explicit Writer(std::ostream& out) : out_(out) {}

    void u32(std::uint32_t v) {
        for (int b = 0; b < 4; ++b) {
            out_.put(static_cast<char>((v >> (8 * b)) & 0xFFu));
        }
    }
    void u64(std::uint64_t v) {
        for (int b = 0; b < 8; ++b) {
            out_.put(static_cast<char>((v >> (8 * b)) & 0xFFu));
        }
    }
    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        out_.write(s.data(), static_cast<std::streamsize>(s.size()));
    }
    void vec(const Vector& v) {
        u32(static_cast<std::uint32_t>(v.size()));
        for (Eigen::Index k = 0; k < v.size(); ++k) {
            f64(v(k));
        }
    }
    void mat(const Matrix& m) {
        u32(static_cast<std::uint32_t>(m.rows()));
        u32(static_cast<std::uint32_t>(m.cols()));
        for (Eigen::Index k = 0; k < m.size(); ++k) {
            f64(m.data()[k]);
        }
    }

private:
    std::ostream& out_;
};

class Reader {
public:
    Reader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

    std::uint32_t u32() {
        unsigned char b[4];
        read(b, 4);
        return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
               static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
    }
    std::uint64_t u64() {
        const std::uint64_t lo = u32();
        const std::uint64_t hi = u32();
        return lo | hi << 32;
    }
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str() {
        const auto n = u32();
        guard(n);
        std::string s(n, '\0');
        read(s.data(), n);
        return s;
    }
    Vector vec() {
        const auto n = u32();
        guard(static_cast<std::uint64_t>(n) * 8);
        Vector v(n);
        for (std::uint32_t k = 0; k < n; ++k) {
            v(k) = f64();
        }
        return v;
    }
    Matrix mat() {
        const auto r = u32();
        const auto c = u32();
        guard(static_cast<std::uint64_t>(r) * c * 8);
        Matrix m(r, c);
        for (Eigen::Index k = 0; k < m.size(); ++k) {
            m.data()[k] = f64();
        }
        return m;
    }
    void read(void* dst, std::size_t n) {
        in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) {
            throw DataError(source_ + ": checkpoint is truncated");
        }
    }
    [[noreturn]] void fail(const std::string& what) const { throw DataError(source_ + ": " + what); }

private:
    void guard(std::uint64_t bytes) const {
        if (bytes > (std::uint64_t{1} << 34)) {
            fail("checkpoint declares an implausible size");
        }
    }

    std::istream& in_;
    std::string source_;
};

} // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    std::ostringstream buffer(std::ios::binary);
    Writer w(buffer);
    buffer.write(kMagic, sizeof(kMagic));
    w.u32(kCheckpointVersion);

    const auto& s = ckpt.model.shape;
    for (int v : {s.features, s.heads, s.head_dim, s.hidden, s.horizon, s.lookback}) {
        w.i32(v);
    }
    w.f64(s.leaky_slope);

    const auto& m = ckpt.meta;
    w.u32(static_cast<std::uint32_t>(m.station_ids.size()));
    for (const auto& id : m.station_ids) {
        w.str(id);
    }
    w.i32(m.cadence_minutes);
    w.f64(m.cv);
    w.vec(m.flow_norm.lo);
    w.vec(m.flow_norm.hi);
    w.vec(m.weather_norm.lo);
    w.vec(m.weather_norm.hi);
    w.mat(m.adjacency);

    std::uint32_t count = 0;
    for_each_tensor(ckpt.model, [&](const std::string&, const auto&) { ++count; });
    w.u32(count);
    for_each_tensor(ckpt.model, [&](const std::string& name, const auto& t) {
        w.str(name);
        w.u32(static_cast<std::uint32_t>(t.rows()));
        w.u32(static_cast<std::uint32_t>(t.cols()));
    });
    for_each_tensor(ckpt.model, [&](const std::string&, const auto& t) {
        for (Eigen::Index k = 0; k < t.size(); ++k) {
            w.f64(t.data()[k]);
        }
    });

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw DataError("cannot write checkpoint " + path.string());
    }
    const auto bytes = buffer.str();
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw DataError("failed writing checkpoint " + path.string());
    }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open checkpoint " + path.string());
    }
    Reader r(in, path.string());
    char magic[sizeof(kMagic)];
    r.read(magic, sizeof(magic));
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        r.fail("not a checkpoint file (bad magic)");
    }
    const auto version = r.u32();
    if (version != kCheckpointVersion) {
        r.fail("unsupported checkpoint version " + std::to_string(version));
    }

    ModelShape shape;
    shape.features = r.i32();
    shape.heads = r.i32();
    shape.head_dim = r.i32();
    shape.hidden = r.i32();
    shape.horizon = r.i32();
    shape.lookback = r.i32();
    shape.leaky_slope = r.f64();
    try {
        shape.validate();
    } catch (const ConfigError& e) {
        r.fail(std::string("invalid model shape: ") + e.what());
    }

    Checkpoint ckpt;
    auto& m = ckpt.meta;
    const auto stations = r.u32();
    for (std::uint32_t k = 0; k < stations; ++k) {
        m.station_ids.push_back(r.str());
    }
    m.cadence_minutes = r.i32();
    m.cv = r.f64();
    m.flow_norm.lo = r.vec();
    m.flow_norm.hi = r.vec();
    m.weather_norm.lo = r.vec();
    m.weather_norm.hi = r.vec();
    m.adjacency = r.mat();

    ckpt.model = ForecastModel::initialize(shape, 0);
    auto views = tensor_views(ckpt.model);
    const auto count = r.u32();
    if (count != views.size()) {
        r.fail("tensor table has " + std::to_string(count) + " entries, expected " + std::to_string(views.size()));
    }
    for (const auto& v : views) {
        const auto name = r.str();
        const auto rows = r.u32();
        const auto cols = r.u32();
        if (name != v.name || rows != v.rows || cols != v.cols) {
            r.fail("tensor " + name + " does not match the stored shape");
        }
    }
    for (auto& v : views) {
        for (Eigen::Index k = 0; k < v.size(); ++k) {
            v.data[k] = r.f64();
        }
    }
    return ckpt;
}

} // namespace tcast::nn

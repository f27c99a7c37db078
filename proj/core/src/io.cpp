#include "qpi/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "qpi/error.hpp"
#include "qpi/keyvalue.hpp"

namespace qpi::io {
namespace {

static_assert(std::endian::native == std::endian::little,
              "raster I/O assumes a little-endian host");

struct PgmHeader {
    int width = 0;
    int height = 0;
    int maxval = 0;
    double pitch = 1.0;
    std::size_t data_offset = 0;
};

PgmHeader parse_pgm_header(const std::string& bytes, const fs::path& path)
{
    PgmHeader h;
    std::size_t pos = 0;
    auto fail = [&](const char* what) -> void {
        throw DataError(fmt::format("{}: {}", path.string(), what));
    };
    auto skip_space_and_comments = [&] {
        while (pos < bytes.size()) {
            const char c = bytes[pos];
            if (c == '#') {
                const auto eol = bytes.find('\n', pos);
                const std::string_view comment(bytes.data() + pos + 1,
                                               (eol == std::string::npos ? bytes.size() : eol) -
                                                   pos - 1);
                const auto words = split_words(comment);
                if (words.size() == 2 && words[0] == "pitch")
                    if (auto p = parse_double(words[1]))
                        h.pitch = *p;
                pos = eol == std::string::npos ? bytes.size() : eol + 1;
            } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                ++pos;
            } else {
                break;
            }
        }
    };
    auto read_int = [&]() -> int {
        skip_space_and_comments();
        const std::size_t start = pos;
        while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9')
            ++pos;
        const auto v = parse_integer(std::string_view(bytes).substr(start, pos - start));
        if (!v || *v <= 0 || *v > 1'000'000)
            fail("malformed PGM header");
        return static_cast<int>(*v);
    };

    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5')
        fail("not a binary PGM (P5) file");
    pos = 2;
    h.width = read_int();
    h.height = read_int();
    h.maxval = read_int();
    if (h.maxval > 65535)
        fail("PGM maxval exceeds 65535");
    if (pos >= bytes.size())
        fail("truncated PGM header");
    ++pos; // single whitespace before the raster
    h.data_offset = pos;
    return h;
}

std::string format_meta(const QuadratureFrame& frame)
{
    std::string out;
    out += "exposure_s = " + format_double(frame.exposure_s) + "\n";
    out += "timestamp_s = " + format_double(frame.timestamp_s) + "\n";
    if (frame.delay_um)
        out += "delay_um = " + format_double(*frame.delay_um) + "\n";
    return out;
}

} // namespace

void write_file_atomic(const fs::path& path, std::string_view bytes)
{
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw DataError("cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out)
            throw DataError("short write to " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec)
        throw DataError(fmt::format("cannot move {} into place: {}", path.string(), ec.message()));
}

std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_f32r(const fs::path& path, const ScalarField& field)
{
    std::string bytes = fmt::format("{} {} {}\n", field.width(), field.height(),
                                    format_double(field.pitch()));
    const std::size_t header = bytes.size();
    bytes.resize(header + field.size() * sizeof(float));
    char* dst = bytes.data() + header;
    for (double v : field.values()) {
        const float f = static_cast<float>(v);
        std::memcpy(dst, &f, sizeof f);
        dst += sizeof f;
    }
    write_file_atomic(path, bytes);
}

ScalarField read_f32r(const fs::path& path)
{
    const std::string bytes = read_file(path);
    const auto eol = bytes.find('\n');
    if (eol == std::string::npos)
        throw DataError(path.string() + ": missing raster header line");
    const auto words = split_words(std::string_view(bytes).substr(0, eol));
    if (words.size() != 3)
        throw DataError(path.string() + ": header must read 'width height pitch'");
    const auto w = parse_integer(words[0]);
    const auto h = parse_integer(words[1]);
    const auto pitch = parse_double(words[2]);
    if (!w || !h || !pitch || *w <= 0 || *h <= 0 || !(*pitch > 0.0))
        throw DataError(path.string() + ": invalid raster header");

    const FieldGeometry g{static_cast<int>(*w), static_cast<int>(*h), *pitch};
    const std::size_t expected = g.pixel_count() * sizeof(float);
    if (bytes.size() - eol - 1 != expected)
        throw DataError(fmt::format("{}: raster payload is {} bytes, expected {}", path.string(),
                                    bytes.size() - eol - 1, expected));
    std::vector<double> values(g.pixel_count());
    const char* src = bytes.data() + eol + 1;
    for (double& v : values) {
        float f = 0.0f;
        std::memcpy(&f, src, sizeof f);
        v = f;
        src += sizeof f;
    }
    try {
        return ScalarField::from_values(g, std::move(values));
    } catch (const ValidationError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

void write_pgm16(const fs::path& path, const ScalarField& counts)
{
    std::string bytes = fmt::format("P5\n# pitch {}\n{} {}\n65535\n", format_double(counts.pitch()),
                                    counts.width(), counts.height());
    bytes.reserve(bytes.size() + counts.size() * 2);
    for (double v : counts.values()) {
        const double r = std::round(v);
        if (!(r >= 0.0 && r <= 65535.0))
            throw ValidationError(fmt::format("{}: value {} does not fit 16 bits", path.string(), v));
        const auto u = static_cast<std::uint16_t>(r);
        bytes.push_back(static_cast<char>(u >> 8));
        bytes.push_back(static_cast<char>(u & 0xff));
    }
    write_file_atomic(path, bytes);
}

ScalarField read_pgm(const fs::path& path)
{
    const std::string bytes = read_file(path);
    const PgmHeader h = parse_pgm_header(bytes, path);
    const std::size_t bpp = h.maxval > 255 ? 2 : 1;
    const FieldGeometry g{h.width, h.height, h.pitch};
    if (bytes.size() - h.data_offset != g.pixel_count() * bpp)
        throw DataError(path.string() + ": PGM payload size does not match header");

    ScalarField f(g);
    const auto* src = reinterpret_cast<const unsigned char*>(bytes.data() + h.data_offset);
    auto values = f.values();
    for (std::size_t i = 0; i < values.size(); ++i)
        values[i] = bpp == 2 ? static_cast<double>((src[2 * i] << 8) | src[2 * i + 1])
                             : static_cast<double>(src[i]);
    return f;
}

void write_mask_pgm(const fs::path& path, const Mask& mask)
{
    std::string bytes = fmt::format("P5\n{} {}\n255\n", mask.width(), mask.height());
    for (std::size_t i = 0; i < mask.size(); ++i)
        bytes.push_back(static_cast<char>(mask.at(i) ? 255 : 0));
    write_file_atomic(path, bytes);
}

Mask read_mask_pgm(const fs::path& path)
{
    const ScalarField f = read_pgm(path);
    Mask m(f.width(), f.height(), false);
    const auto values = f.values();
    for (std::size_t i = 0; i < values.size(); ++i)
        m.set(i, values[i] > 0.0);
    return m;
}

void write_frame(const fs::path& dir, const QuadratureFrame& frame, ChannelEncoding encoding)
{
    frame.validate();
    fs::create_directories(dir);
    for (int k = 0; k < kChannelCount; ++k) {
        if (encoding == ChannelEncoding::counts) {
            ScalarField counts = frame.channels[k];
            for (double& v : counts.values())
                v *= frame.exposure_s;
            write_pgm16(dir / fmt::format("ch{}.pgm", k), counts);
        } else {
            write_f32r(dir / fmt::format("ch{}.f32r", k), frame.channels[k]);
        }
    }
    write_file_atomic(dir / "meta.txt", format_meta(frame));
}

QuadratureFrame read_frame(const fs::path& dir)
{
    if (!fs::is_directory(dir))
        throw DataError(dir.string() + ": not a frame directory");

    const auto meta = KeyValueFile::load(dir / "meta.txt");
    meta.reject_unknown({"exposure_s", "timestamp_s", "delay_um"});
    const double exposure = meta.require_double("exposure_s");
    const double timestamp = meta.require_double("timestamp_s");
    const auto delay = meta.get_double("delay_um");
    if (!(exposure > 0.0))
        throw DataError(meta.source() + ": exposure_s must be positive");

    auto load_channel = [&](int k) {
        const fs::path pgm = dir / fmt::format("ch{}.pgm", k);
        const fs::path raw = dir / fmt::format("ch{}.f32r", k);
        const bool has_pgm = fs::exists(pgm);
        const bool has_raw = fs::exists(raw);
        if (has_pgm && has_raw)
            throw DataError(fmt::format("{}: both ch{}.pgm and ch{}.f32r present", dir.string(), k, k));
        if (has_raw)
            return read_f32r(raw);
        if (!has_pgm)
            throw DataError(fmt::format("{}: missing channel file ch{}", dir.string(), k));
        ScalarField f = read_pgm(pgm);
        for (double& v : f.values())
            v /= exposure;
        return f;
    };

    QuadratureFrame frame{{load_channel(0), load_channel(1), load_channel(2), load_channel(3)},
                          exposure, timestamp, delay};
    try {
        frame.validate();
    } catch (const ValidationError& e) {
        throw DataError(dir.string() + ": " + e.what());
    }
    return frame;
}

std::vector<fs::path> list_frame_dirs(const fs::path& root)
{
    if (!fs::is_directory(root))
        throw DataError(root.string() + ": not a directory");
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(root)) {
        const auto name = entry.path().filename().string();
        if (entry.is_directory() && name.rfind("frame_", 0) == 0)
            dirs.push_back(entry.path());
    }
    std::sort(dirs.begin(), dirs.end());
    return dirs;
}

std::string frame_dir_name(std::size_t index)
{
    return fmt::format("frame_{:04d}", index);
}

} // namespace qpi::io

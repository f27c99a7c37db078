#include "qpi_tools/run_config.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>

#include <fmt/format.h>

#include "qpi/error.hpp"
#include "qpi/io.hpp"
#include "qpi/keyvalue.hpp"

namespace qpi::cli {
namespace {

struct BadValue {
    std::string what;
};

double to_double(std::string_view v)
{
    const auto d = parse_double(v);
    if (!d || !std::isfinite(*d))
        throw BadValue{"expected a finite number"};
    return *d;
}

long long to_integer(std::string_view v)
{
    const auto i = parse_integer(v);
    if (!i)
        throw BadValue{"expected an integer"};
    return *i;
}

int to_int(std::string_view v)
{
    const long long i = to_integer(v);
    if (i < -2147483647LL || i > 2147483647LL)
        throw BadValue{"integer out of range"};
    return static_cast<int>(i);
}

bool to_bool(std::string_view v)
{
    if (v == "true" || v == "1")
        return true;
    if (v == "false" || v == "0")
        return false;
    throw BadValue{"expected true or false"};
}

std::array<double, 4> to_four(std::string_view v)
{
    const auto words = split_words(v);
    if (words.size() != 4)
        throw BadValue{"expected four numbers"};
    std::array<double, 4> out{};
    for (std::size_t i = 0; i < 4; ++i)
        out[i] = to_double(words[i]);
    return out;
}

Roi to_roi(std::string_view v)
{
    const auto roi = parse_roi(v);
    if (!roi)
        throw BadValue{"expected 'x0 y0 width height'"};
    return *roi;
}

template <class Enum>
Enum to_enum(std::string_view v, std::initializer_list<std::pair<std::string_view, Enum>> names)
{
    for (const auto& [name, e] : names)
        if (v == name)
            return e;
    std::string list;
    for (const auto& n : names)
        list += (list.empty() ? "" : "|") + std::string(n.first);
    throw BadValue{"expected one of " + list};
}

std::string_view scene_name(Scene s)
{
    switch (s) {
    case Scene::blank: return "blank";
    case Scene::mask: return "mask";
    case Scene::drying: return "drying";
    case Scene::sweep: return "sweep";
    }
    return "blank";
}

std::string four(const std::array<double, 4>& v)
{
    return fmt::format("{} {} {} {}", format_double(v[0]), format_double(v[1]), format_double(v[2]),
                       format_double(v[3]));
}

std::string roi_text(const Roi& r)
{
    return fmt::format("{} {} {} {}", r.x0, r.y0, r.width, r.height);
}

using Setter = std::function<void(RunConfig&, std::string_view)>;

const std::map<std::string, Setter, std::less<>>& setters()
{
    static const std::map<std::string, Setter, std::less<>> table{
        {"width", [](RunConfig& c, std::string_view v) { c.geometry.width = to_int(v); }},
        {"height", [](RunConfig& c, std::string_view v) { c.geometry.height = to_int(v); }},
        {"pitch_um", [](RunConfig& c, std::string_view v) { c.geometry.pitch_um = to_double(v); }},
        {"base_rate", [](RunConfig& c, std::string_view v) { c.system.base_rate = to_double(v); }},
        {"visibility",
         [](RunConfig& c, std::string_view v) { c.system.system_visibility = to_double(v); }},
        {"signal_wavelength_um",
         [](RunConfig& c, std::string_view v) { c.system.signal_wavelength_um = to_double(v); }},
        {"idler_wavelength_um",
         [](RunConfig& c, std::string_view v) { c.system.idler_wavelength_um = to_double(v); }},
        {"delay_to_phase",
         [](RunConfig& c, std::string_view v) { c.system.delay_to_phase = to_double(v); }},
        {"channel_gains", [](RunConfig& c, std::string_view v) { c.system.channel_gains = to_four(v); }},
        {"channel_offsets",
         [](RunConfig& c, std::string_view v) { c.system.channel_offsets = to_four(v); }},
        {"noise",
         [](RunConfig& c, std::string_view v) {
             c.system.noise = to_enum<NoiseModel>(
                 v, {{"none", NoiseModel::none}, {"poisson", NoiseModel::poisson}});
         }},
        {"seed",
         [](RunConfig& c, std::string_view v) {
             const long long s = to_integer(v);
             if (s < 0)
                 throw BadValue{"seed must be non-negative"};
             c.system.rng_seed = static_cast<std::uint64_t>(s);
         }},
        {"exposure_s", [](RunConfig& c, std::string_view v) { c.exposure_s = to_double(v); }},
        {"frames", [](RunConfig& c, std::string_view v) { c.frames = to_int(v); }},
        {"frame_interval_s", [](RunConfig& c, std::string_view v) { c.frame_interval_s = to_double(v); }},
        {"drift_std_rad", [](RunConfig& c, std::string_view v) { c.drift_std_rad = to_double(v); }},
        {"scene",
         [](RunConfig& c, std::string_view v) {
             c.scene = to_enum<Scene>(v, {{"blank", Scene::blank},
                                          {"mask", Scene::mask},
                                          {"drying", Scene::drying},
                                          {"sweep", Scene::sweep}});
         }},
        {"mask_rows", [](RunConfig& c, std::string_view v) { c.mask.rows = to_int(v); }},
        {"mask_cols", [](RunConfig& c, std::string_view v) { c.mask.cols = to_int(v); }},
        {"mask_cell_um", [](RunConfig& c, std::string_view v) { c.mask.cell_size_um = to_double(v); }},
        {"mask_thickness_min_um",
         [](RunConfig& c, std::string_view v) { c.mask.thickness_min_um = to_double(v); }},
        {"mask_thickness_max_um",
         [](RunConfig& c, std::string_view v) { c.mask.thickness_max_um = to_double(v); }},
        {"mask_effective_index",
         [](RunConfig& c, std::string_view v) { c.mask.effective_index = to_double(v); }},
        {"mask_layout",
         [](RunConfig& c, std::string_view v) {
             c.mask.layout = to_enum<forward::MaskLayout>(
                 v, {{"serpentine", forward::MaskLayout::serpentine},
                     {"spiral", forward::MaskLayout::spiral}});
         }},
        {"mask_marker", [](RunConfig& c, std::string_view v) { c.mask.marker = to_bool(v); }},
        {"film_roi", [](RunConfig& c, std::string_view v) { c.film.region = to_roi(v); }},
        {"film_phase_top", [](RunConfig& c, std::string_view v) { c.film.phase_top = to_double(v); }},
        {"film_phase_bottom",
         [](RunConfig& c, std::string_view v) { c.film.phase_bottom = to_double(v); }},
        {"film_rate_top", [](RunConfig& c, std::string_view v) { c.film.rate_top = to_double(v); }},
        {"film_rate_bottom", [](RunConfig& c, std::string_view v) { c.film.rate_bottom = to_double(v); }},
        {"sweep_start_um", [](RunConfig& c, std::string_view v) { c.sweep_start_um = to_double(v); }},
        {"sweep_step_um", [](RunConfig& c, std::string_view v) { c.sweep_step_um = to_double(v); }},
        {"calib_roi", [](RunConfig& c, std::string_view v) { c.calib_roi = to_roi(v); }},
        {"kappa_search", [](RunConfig& c, std::string_view v) { c.kappa_search = to_bool(v); }},
        {"sigma", [](RunConfig& c, std::string_view v) { c.sigma = to_double(v); }},
        {"validity_threshold",
         [](RunConfig& c, std::string_view v) { c.validity_threshold = to_double(v); }},
        {"reference_roi", [](RunConfig& c, std::string_view v) { c.reference_roi = to_roi(v); }},
        {"probe_window", [](RunConfig& c, std::string_view v) { c.probe_window = to_int(v); }},
        {"material_index",
         [](RunConfig& c, std::string_view v) { c.material.refractive_index = to_double(v); }},
        {"material_wavelength_um",
         [](RunConfig& c, std::string_view v) { c.material.wavelength_um = to_double(v); }},
    };
    return table;
}

void require(bool ok, const char* what)
{
    if (!ok)
        throw ValidationError(what);
}

} // namespace

std::optional<Roi> parse_roi(std::string_view text)
{
    std::string s(text);
    std::replace(s.begin(), s.end(), ',', ' ');
    const auto words = split_words(s);
    if (words.size() != 4)
        return std::nullopt;
    std::array<int, 4> v{};
    for (std::size_t i = 0; i < 4; ++i) {
        const auto n = parse_integer(words[i]);
        if (!n || *n < -2147483647LL || *n > 2147483647LL)
            return std::nullopt;
        v[i] = static_cast<int>(*n);
    }
    return Roi{v[0], v[1], v[2], v[3]};
}

double RunConfig::sweep_step() const
{
    if (sweep_step_um > 0.0)
        return sweep_step_um;
    return 2.0 * kPi / system.effective_delay_to_phase() / 16.0;
}

void RunConfig::validate() const
{
    require(geometry.width >= 1 && geometry.height >= 1, "width and height must be at least 1");
    require(geometry.width <= 16384 && geometry.height <= 16384, "width and height must not exceed 16384");
    require(geometry.pitch_um > 0.0, "pitch_um must be positive");
    system.validate();
    require(exposure_s > 0.0, "exposure_s must be positive");
    require(frames >= 1, "frames must be at least 1");
    require(frame_interval_s > 0.0, "frame_interval_s must be positive");
    require(drift_std_rad >= 0.0, "drift_std_rad must be non-negative");
    mask.validate();
    require(sweep_step_um >= 0.0, "sweep_step_um must be non-negative");
    require(sigma >= 0.0, "sigma must be non-negative");
    require(validity_threshold >= 0.0, "validity_threshold must be non-negative");
    require(probe_window >= 1, "probe_window must be at least 1");
    material.validate();
    if (calib_roi)
        calib_roi->require_inside(geometry.width, geometry.height);
    if (reference_roi)
        reference_roi->require_inside(geometry.width, geometry.height);
    if (scene == Scene::drying) {
        forward::TimelineSpec spec;
        spec.frames = frames;
        spec.frame_interval_s = frame_interval_s;
        spec.drying = film;
        spec.validate();
        film.region.require_inside(geometry.width, geometry.height);
    }
}

RunConfig parse_run_config(std::string_view text, const std::string& source)
{
    const auto kv = KeyValueFile::parse(text, source);
    RunConfig c;
    const auto& table = setters();
    for (const auto& e : kv.entries()) {
        const auto it = table.find(e.key);
        if (it == table.end())
            throw DataError(fmt::format("{}:{}: unknown key '{}'", source, e.line, e.key));
        try {
            it->second(c, e.value);
        } catch (const BadValue& b) {
            throw DataError(fmt::format("{}:{}: {}: {}", source, e.line, e.key, b.what));
        }
    }
    try {
        c.validate();
    } catch (const ValidationError& v) {
        throw ValidationError(fmt::format("{}: {}", source, v.what()));
    }
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path)
{
    return parse_run_config(io::read_file(path), path.string());
}

std::string serialize(const RunConfig& c)
{
    std::string out;
    const auto put = [&](std::string_view key, const std::string& value) {
        out += fmt::format("{} = {}\n", key, value);
    };
    const auto num = [](double v) { return format_double(v); };
    put("width", std::to_string(c.geometry.width));
    put("height", std::to_string(c.geometry.height));
    put("pitch_um", num(c.geometry.pitch_um));
    put("base_rate", num(c.system.base_rate));
    put("visibility", num(c.system.system_visibility));
    put("signal_wavelength_um", num(c.system.signal_wavelength_um));
    put("idler_wavelength_um", num(c.system.idler_wavelength_um));
    put("delay_to_phase", num(c.system.delay_to_phase));
    put("channel_gains", four(c.system.channel_gains));
    put("channel_offsets", four(c.system.channel_offsets));
    put("noise", c.system.noise == NoiseModel::poisson ? "poisson" : "none");
    put("seed", std::to_string(c.system.rng_seed));
    put("exposure_s", num(c.exposure_s));
    put("frames", std::to_string(c.frames));
    put("frame_interval_s", num(c.frame_interval_s));
    put("drift_std_rad", num(c.drift_std_rad));
    put("scene", std::string(scene_name(c.scene)));
    put("mask_rows", std::to_string(c.mask.rows));
    put("mask_cols", std::to_string(c.mask.cols));
    put("mask_cell_um", num(c.mask.cell_size_um));
    put("mask_thickness_min_um", num(c.mask.thickness_min_um));
    put("mask_thickness_max_um", num(c.mask.thickness_max_um));
    put("mask_effective_index", num(c.mask.effective_index));
    put("mask_layout", c.mask.layout == forward::MaskLayout::spiral ? "spiral" : "serpentine");
    put("mask_marker", c.mask.marker ? "true" : "false");
    put("film_roi", roi_text(c.film.region));
    put("film_phase_top", num(c.film.phase_top));
    put("film_phase_bottom", num(c.film.phase_bottom));
    put("film_rate_top", num(c.film.rate_top));
    put("film_rate_bottom", num(c.film.rate_bottom));
    put("sweep_start_um", num(c.sweep_start_um));
    put("sweep_step_um", num(c.sweep_step_um));
    if (c.calib_roi)
        put("calib_roi", roi_text(*c.calib_roi));
    put("kappa_search", c.kappa_search ? "true" : "false");
    put("sigma", num(c.sigma));
    put("validity_threshold", num(c.validity_threshold));
    if (c.reference_roi)
        put("reference_roi", roi_text(*c.reference_roi));
    put("probe_window", std::to_string(c.probe_window));
    put("material_index", num(c.material.refractive_index));
    put("material_wavelength_um", num(c.material.wavelength_um));
    return out;
}

} // namespace qpi::cli

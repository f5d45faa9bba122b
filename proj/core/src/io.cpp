#include "nilm/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <istream>
#include <ostream>
#include <sstream>
#include <type_traits>
#include <variant>

#include <nlohmann/json.hpp>

namespace nilm::io {

using json = nlohmann::ordered_json;

namespace {

[[noreturn]] void parse_fail(std::size_t line, const std::string& what) {
  fail(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + what);
}

json parse_json(std::string_view text, const char* what) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    fail(ErrorCode::ParseError, std::string(what) + ": " + e.what());
  }
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) fail(ErrorCode::ParseError, where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      fail(ErrorCode::ParseError, where + ": unknown key \"" + key + "\"");
    }
  }
}

template <class T>
void read_opt(const json& j, const char* key, T& out, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->template get<T>();
  } catch (const json::exception&) {
    fail(ErrorCode::ParseError, where + ": bad value for \"" + key + "\"");
  }
}

template <class T>
T read_req(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) fail(ErrorCode::ParseError, where + ": missing \"" + key + "\"");
  T out{};
  read_opt(j, key, out, where);
  return out;
}

template <class F>
auto guarded(const char* what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    fail(ErrorCode::ParseError, std::string(what) + ": " + e.what());
  }
}

void append_number(std::string& out, double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, end);
}

bool parse_number(std::string_view s, double& v) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(v);
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Header line: "# {...}".
json header_json(std::istream& in, std::size_t& line_no, const char* what) {
  std::string line;
  if (!std::getline(in, line)) parse_fail(1, std::string("empty ") + what + " file");
  line_no = 1;
  const auto t = trim(line);
  if (t.empty() || t.front() != '#') parse_fail(1, "missing '#' JSON header");
  try {
    return json::parse(t.substr(1));
  } catch (const json::parse_error& e) {
    parse_fail(1, std::string("bad JSON header: ") + e.what());
  }
}

double unit_scale(SignalKind kind, const std::string& unit) {
  if (kind == SignalKind::current) {
    if (unit == "A") return 1.0;
    if (unit == "mA") return 1e-3;
  } else {
    if (unit == "V") return 1.0;
    if (unit == "kV") return 1e3;
  }
  fail(ErrorCode::UnitError, "unit \"" + unit + "\" is not valid for a " +
                                 (kind == SignalKind::current ? "current" : "voltage") + " channel");
}

const char* kind_name(SignalKind k) { return k == SignalKind::current ? "current" : "voltage"; }

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::IoError, "cannot write " + path.string());
  return f;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::IoError, "cannot read " + path.string());
  return f;
}

}  // namespace

std::string read_text_file(const std::filesystem::path& path) {
  auto f = open_in(path);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  auto f = open_out(path);
  f << text;
  if (!f) fail(ErrorCode::IoError, "write failed: " + path.string());
}

// ---------------------------------------------------------------- waveforms

const Waveform& WaveformSet::first(SignalKind kind) const {
  for (const auto& c : channels) {
    if (c.waveform.kind == kind) return c.waveform;
  }
  fail(ErrorCode::InvalidArgument, std::string("no ") + kind_name(kind) + " channel");
}

WaveformSet make_waveform_set(const Waveform& current, const Waveform& voltage) {
  if (current.size() != voltage.size() || current.sample_rate != voltage.sample_rate) {
    fail(ErrorCode::LengthMismatch, "current and voltage must share length and sample rate");
  }
  WaveformSet s;
  s.sample_rate = current.sample_rate;
  s.start_time = current.start_time;
  s.channels.push_back({"current", "A", current});
  s.channels.push_back({"voltage", "V", voltage});
  s.channels[0].waveform.kind = SignalKind::current;
  s.channels[1].waveform.kind = SignalKind::voltage;
  return s;
}

WaveformSet parse_waveforms(std::istream& in) {
  std::size_t line_no = 0;
  const json h = header_json(in, line_no, "waveform");
  WaveformSet set;
  try {
    if (h.contains("format") && h.at("format") != kWaveformFormat) {
      parse_fail(1, "unsupported format " + h.at("format").dump());
    }
    set.sample_rate = h.at("sample_rate").get<double>();
    set.start_time = h.value("start_time", 0.0);
    for (const auto& c : h.at("channels")) {
      WaveformChannel ch;
      ch.name = c.at("name").get<std::string>();
      const auto kind = c.at("kind").get<std::string>();
      if (kind == "current") {
        ch.waveform.kind = SignalKind::current;
      } else if (kind == "voltage") {
        ch.waveform.kind = SignalKind::voltage;
      } else {
        parse_fail(1, "channel kind must be current or voltage, got " + kind);
      }
      ch.unit = c.at("unit").get<std::string>();
      set.channels.push_back(std::move(ch));
    }
  } catch (const json::exception& e) {
    parse_fail(1, std::string("bad header: ") + e.what());
  }
  if (!(set.sample_rate > 0.0) || !std::isfinite(set.sample_rate)) parse_fail(1, "sample_rate must be positive");
  if (set.channels.empty()) parse_fail(1, "no channels declared");
  std::vector<double> scale;
  for (auto& c : set.channels) {
    scale.push_back(unit_scale(c.waveform.kind, c.unit));
    c.waveform.sample_rate = set.sample_rate;
    c.waveform.start_time = set.start_time;
  }

  std::string line;
  if (!std::getline(in, line)) parse_fail(2, "missing column line");
  ++line_no;
  const auto cols = split_csv(line);
  if (cols.size() != set.channels.size() + 1 || trim(cols[0]) != "time_s") {
    parse_fail(line_no, "columns must be time_s followed by the declared channels");
  }
  for (std::size_t c = 0; c < set.channels.size(); ++c) {
    if (trim(cols[c + 1]) != set.channels[c].name) {
      parse_fail(line_no, "column " + std::to_string(c + 2) + " does not match channel " + set.channels[c].name);
    }
  }

  const double dt = 1.0 / set.sample_rate;
  double prev_t = -INFINITY;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != set.channels.size() + 1) {
      parse_fail(line_no, "expected " + std::to_string(set.channels.size() + 1) + " fields, got " +
                              std::to_string(fields.size()));
    }
    double t = 0.0;
    if (!parse_number(fields[0], t)) parse_fail(line_no, "bad time value");
    if (!(t > prev_t)) parse_fail(line_no, "time is not increasing");
    if (std::abs(t - (set.start_time + static_cast<double>(n) * dt)) > 0.5 * dt) {
      parse_fail(line_no, "time does not follow the declared sample rate");
    }
    prev_t = t;
    for (std::size_t c = 0; c < set.channels.size(); ++c) {
      double v = 0.0;
      if (!parse_number(fields[c + 1], v)) parse_fail(line_no, "bad value in column " + std::to_string(c + 2));
      set.channels[c].waveform.samples.push_back(scale[c] == 1.0 ? v : v * scale[c]);
    }
    ++n;
  }
  return set;
}

WaveformSet read_waveforms(const std::filesystem::path& path) {
  auto f = open_in(path);
  return parse_waveforms(f);
}

void write_waveforms(std::ostream& out, const WaveformSet& set) {
  if (set.channels.empty()) fail(ErrorCode::InvalidArgument, "no channels to write");
  const std::size_t n = set.channels.front().waveform.size();
  json h;
  h["format"] = kWaveformFormat;
  h["sample_rate"] = set.sample_rate;
  h["start_time"] = set.start_time;
  h["channels"] = json::array();
  std::vector<double> inv;
  for (const auto& c : set.channels) {
    if (c.waveform.size() != n) fail(ErrorCode::LengthMismatch, "channels differ in length");
    inv.push_back(1.0 / unit_scale(c.waveform.kind, c.unit));
    h["channels"].push_back({{"name", c.name}, {"kind", kind_name(c.waveform.kind)}, {"unit", c.unit}});
  }
  out << "# " << h.dump() << '\n' << "time_s";
  for (const auto& c : set.channels) out << ',' << c.name;
  out << '\n';
  std::string row;
  for (std::size_t k = 0; k < n; ++k) {
    row.clear();
    append_number(row, set.start_time + static_cast<double>(k) / set.sample_rate);
    for (std::size_t c = 0; c < set.channels.size(); ++c) {
      row.push_back(',');
      const double v = set.channels[c].waveform.samples[k];
      append_number(row, inv[c] == 1.0 ? v : v * inv[c]);
    }
    row.push_back('\n');
    out << row;
  }
}

void write_waveforms(const std::filesystem::path& path, const WaveformSet& set) {
  auto f = open_out(path);
  write_waveforms(f, set);
  if (!f) fail(ErrorCode::IoError, "write failed: " + path.string());
}

// -------------------------------------------------------------------- truth

TruthTable truth_table(const GroundTruth& truth, double sample_rate, double start_time) {
  if (!(sample_rate > 0.0)) fail(ErrorCode::InvalidArgument, "sample_rate must be positive");
  TruthTable t;
  t.duration = truth.period_durations;
  for (std::size_t k = 0; k < t.duration.size(); ++k) {
    t.t_start.push_back(start_time + (k < truth.boundaries.size() ? truth.boundaries[k] / sample_rate : 0.0));
  }
  for (const auto& l : truth.loads) {
    t.loads.push_back({l.id, l.group.empty() ? l.id : l.group, std::string(to_string(l.load_class)), l.p_series});
    t.loads.back().p.resize(t.duration.size(), 0.0);
  }
  return t;
}

TruthTable parse_truth(std::istream& in) {
  std::size_t line_no = 0;
  const json h = header_json(in, line_no, "truth");
  TruthTable t;
  try {
    if (h.contains("format") && h.at("format") != kTruthFormat) {
      parse_fail(1, "unsupported format " + h.at("format").dump());
    }
    for (const auto& l : h.at("loads")) {
      TruthTable::Column c;
      c.id = l.at("id").get<std::string>();
      c.group = l.value("group", c.id);
      c.load_class = l.value("class", std::string());
      t.loads.push_back(std::move(c));
    }
  } catch (const json::exception& e) {
    parse_fail(1, std::string("bad header: ") + e.what());
  }
  std::string line;
  if (!std::getline(in, line)) parse_fail(2, "missing column line");
  ++line_no;
  const auto cols = split_csv(line);
  if (cols.size() != t.loads.size() + 3 || trim(cols[0]) != "period" || trim(cols[1]) != "t_start_s" ||
      trim(cols[2]) != "duration_s") {
    parse_fail(line_no, "columns must be period,t_start_s,duration_s followed by the declared loads");
  }
  for (std::size_t c = 0; c < t.loads.size(); ++c) {
    if (trim(cols[c + 3]) != t.loads[c].id) parse_fail(line_no, "column does not match load " + t.loads[c].id);
  }
  std::size_t k = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != cols.size()) parse_fail(line_no, "wrong field count");
    double idx = 0.0, ts = 0.0, d = 0.0;
    if (!parse_number(f[0], idx) || idx != static_cast<double>(k)) parse_fail(line_no, "period index out of sequence");
    if (!parse_number(f[1], ts) || !parse_number(f[2], d) || !(d > 0.0)) parse_fail(line_no, "bad period timing");
    t.t_start.push_back(ts);
    t.duration.push_back(d);
    for (std::size_t c = 0; c < t.loads.size(); ++c) {
      double v = 0.0;
      if (!parse_number(f[c + 3], v)) parse_fail(line_no, "bad power value");
      t.loads[c].p.push_back(v);
    }
    ++k;
  }
  return t;
}

TruthTable read_truth(const std::filesystem::path& path) {
  auto f = open_in(path);
  return parse_truth(f);
}

void write_truth(std::ostream& out, const TruthTable& truth) {
  json h;
  h["format"] = kTruthFormat;
  h["loads"] = json::array();
  for (const auto& l : truth.loads) {
    if (l.p.size() != truth.duration.size()) fail(ErrorCode::LengthMismatch, "truth column " + l.id + " has the wrong length");
    h["loads"].push_back({{"id", l.id}, {"group", l.group}, {"class", l.load_class}});
  }
  out << "# " << h.dump() << "\nperiod,t_start_s,duration_s";
  for (const auto& l : truth.loads) out << ',' << l.id;
  out << '\n';
  std::string row;
  for (std::size_t k = 0; k < truth.duration.size(); ++k) {
    row = std::to_string(k);
    row.push_back(',');
    append_number(row, truth.t_start[k]);
    row.push_back(',');
    append_number(row, truth.duration[k]);
    for (const auto& l : truth.loads) {
      row.push_back(',');
      append_number(row, l.p[k]);
    }
    row.push_back('\n');
    out << row;
  }
}

void write_truth(const std::filesystem::path& path, const TruthTable& truth) {
  auto f = open_out(path);
  write_truth(f, truth);
  if (!f) fail(ErrorCode::IoError, "write failed: " + path.string());
}

std::vector<NamedSeries> grouped_truth(const TruthTable& truth) {
  std::vector<NamedSeries> out;
  for (const auto& l : truth.loads) {
    const auto& g = l.group.empty() ? l.id : l.group;
    auto it = std::find_if(out.begin(), out.end(), [&](const auto& s) { return s.id == g; });
    if (it == out.end()) {
      out.push_back({g, l.p, false});
    } else {
      for (std::size_t k = 0; k < l.p.size(); ++k) it->p[k] += l.p[k];
    }
  }
  return out;
}

// ----------------------------------------------------------------- scenario

namespace {

json harmonics_json(const std::vector<HarmonicTerm>& h) {
  json a = json::array();
  for (const auto& t : h) a.push_back({{"order", t.order}, {"amplitude", t.amplitude}, {"phase", t.phase}});
  return a;
}

std::vector<HarmonicTerm> harmonics_from(const json& j, const std::string& where) {
  if (!j.is_array()) fail(ErrorCode::ParseError, where + ": expected an array of harmonic terms");
  std::vector<HarmonicTerm> out;
  for (const auto& t : j) {
    check_keys(t, {"order", "amplitude", "phase"}, where);
    HarmonicTerm h;
    h.order = read_req<int>(t, "order", where);
    h.amplitude = read_req<double>(t, "amplitude", where);
    read_opt(t, "phase", h.phase, where);
    out.push_back(h);
  }
  return out;
}

json profile_json(const Profile& p) {
  json a = json::array();
  for (const auto& [t, v] : p.points) a.push_back({t, v});
  return a;
}

Profile profile_from(const json& j, const std::string& where) {
  Profile p;
  if (!j.is_array()) fail(ErrorCode::ParseError, where + ": profile must be an array of [t, value]");
  for (const auto& pt : j) {
    if (!pt.is_array() || pt.size() != 2 || !pt[0].is_number() || !pt[1].is_number()) {
      fail(ErrorCode::ParseError, where + ": profile points are [t, value]");
    }
    p.points.emplace_back(pt[0].get<double>(), pt[1].get<double>());
  }
  return p;
}

json load_params_json(const LoadModel& l) {
  return std::visit(
      [](const auto& p) -> json {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, TwoStateParams>) {
          return {{"p_on", p.p_on}, {"power_factor", p.power_factor}, {"harmonics", harmonics_json(p.harmonics)}};
        } else if constexpr (std::is_same_v<T, UbrParams>) {
          return {{"p_mean", p.p_mean},
                  {"conduction_angle", p.conduction_angle},
                  {"power_profile", profile_json(p.power_profile)}};
        } else if constexpr (std::is_same_v<T, FsmVaryingParams>) {
          return {{"p_base", p.p_base},
                  {"p_profile", profile_json(p.p_profile)},
                  {"p_min", p.p_min},
                  {"p_max", p.p_max},
                  {"knot_interval", p.knot_interval},
                  {"step_sigma", p.step_sigma},
                  {"step_dp", p.step_dp},
                  {"step_dq", p.step_dq},
                  {"coupling_harmonic", p.coupling_harmonic},
                  {"coupling_slope", p.coupling_slope},
                  {"coupling_intercept", p.coupling_intercept},
                  {"coupling_phase", p.coupling_phase}};
        } else {
          return {{"terms", harmonics_json(p.terms)}};
        }
      },
      l.params);
}

LoadParams load_params_from(LoadClass kind, const json& j, const std::string& where) {
  switch (kind) {
    case LoadClass::two_state: {
      check_keys(j, {"p_on", "power_factor", "harmonics"}, where);
      TwoStateParams p;
      p.p_on = read_req<double>(j, "p_on", where);
      read_opt(j, "power_factor", p.power_factor, where);
      if (j.contains("harmonics")) p.harmonics = harmonics_from(j.at("harmonics"), where);
      return p;
    }
    case LoadClass::ubr_single_phase:
    case LoadClass::ubr_three_phase: {
      check_keys(j, {"p_mean", "conduction_angle", "power_profile"}, where);
      UbrParams p;
      p.p_mean = read_req<double>(j, "p_mean", where);
      read_opt(j, "conduction_angle", p.conduction_angle, where);
      if (j.contains("power_profile")) p.power_profile = profile_from(j.at("power_profile"), where);
      return p;
    }
    case LoadClass::fsm_varying: {
      check_keys(j,
                 {"p_base", "p_profile", "p_min", "p_max", "knot_interval", "step_sigma", "step_dp", "step_dq",
                  "coupling_harmonic", "coupling_slope", "coupling_intercept", "coupling_phase"},
                 where);
      FsmVaryingParams p;
      read_opt(j, "p_base", p.p_base, where);
      if (j.contains("p_profile")) p.p_profile = profile_from(j.at("p_profile"), where);
      read_opt(j, "p_min", p.p_min, where);
      read_opt(j, "p_max", p.p_max, where);
      read_opt(j, "knot_interval", p.knot_interval, where);
      read_opt(j, "step_sigma", p.step_sigma, where);
      read_opt(j, "step_dp", p.step_dp, where);
      read_opt(j, "step_dq", p.step_dq, where);
      read_opt(j, "coupling_harmonic", p.coupling_harmonic, where);
      read_opt(j, "coupling_slope", p.coupling_slope, where);
      read_opt(j, "coupling_intercept", p.coupling_intercept, where);
      read_opt(j, "coupling_phase", p.coupling_phase, where);
      return p;
    }
    case LoadClass::linear_sine: {
      check_keys(j, {"terms"}, where);
      LinearParams p;
      if (j.contains("terms")) p.terms = harmonics_from(j.at("terms"), where);
      return p;
    }
  }
  fail(ErrorCode::ParseError, where + ": unknown load class");
}

}  // namespace

std::string scenario_to_json(const MachineScenario& sc) {
  json j;
  j["duration"] = sc.duration;
  j["sample_rate"] = sc.sample_rate;
  j["seed"] = sc.seed;
  j["noise_rms"] = sc.noise_rms;
  j["noise_rel"] = sc.noise_rel;
  j["mains"] = {{"v_rms", sc.mains.v_rms}, {"frequency", sc.mains.frequency}};
  if (sc.sensor) j["sensor"] = {{"v0", sc.sensor->v0}, {"f_cut", sc.sensor->f_cut}};
  j["loads"] = json::array();
  for (const auto& l : sc.loads) {
    json lj;
    lj["id"] = l.id;
    if (!l.group.empty()) lj["group"] = l.group;
    lj["class"] = to_string(l.load_class);
    json s = json::array();
    for (const auto& iv : l.schedule) s.push_back({iv.t_on, iv.t_off});
    lj["schedule"] = s;
    lj["params"] = load_params_json(l);
    j["loads"].push_back(std::move(lj));
  }
  return j.dump(2) + "\n";
}

MachineScenario scenario_from_json(std::string_view text) {
  return guarded("scenario", [&] {
    const json j = parse_json(text, "scenario");
    const std::string where = "scenario";
    check_keys(j, {"duration", "sample_rate", "seed", "noise_rms", "noise_rel", "mains", "sensor", "loads"}, where);
    MachineScenario sc;
    read_opt(j, "duration", sc.duration, where);
    read_opt(j, "sample_rate", sc.sample_rate, where);
    read_opt(j, "seed", sc.seed, where);
    read_opt(j, "noise_rms", sc.noise_rms, where);
    read_opt(j, "noise_rel", sc.noise_rel, where);
    if (j.contains("mains")) {
      const auto& m = j.at("mains");
      check_keys(m, {"v_rms", "frequency"}, "scenario.mains");
      read_opt(m, "v_rms", sc.mains.v_rms, "scenario.mains");
      read_opt(m, "frequency", sc.mains.frequency, "scenario.mains");
    }
    if (j.contains("sensor") && !j.at("sensor").is_null()) {
      const auto& s = j.at("sensor");
      check_keys(s, {"v0", "f_cut"}, "scenario.sensor");
      SensorModel m;
      read_opt(s, "v0", m.v0, "scenario.sensor");
      read_opt(s, "f_cut", m.f_cut, "scenario.sensor");
      sc.sensor = m;
    }
    if (!j.contains("loads") || !j.at("loads").is_array()) fail(ErrorCode::ParseError, "scenario: loads must be an array");
    for (const auto& lj : j.at("loads")) {
      const std::string lw = "scenario.loads[" + std::to_string(sc.loads.size()) + "]";
      check_keys(lj, {"id", "group", "class", "schedule", "params"}, lw);
      LoadModel l;
      l.id = read_req<std::string>(lj, "id", lw);
      read_opt(lj, "group", l.group, lw);
      const auto cls = read_req<std::string>(lj, "class", lw);
      const auto kind = load_class_from_string(cls);
      if (!kind) fail(ErrorCode::ParseError, lw + ": unknown class \"" + cls + "\"");
      l.load_class = *kind;
      if (lj.contains("schedule")) {
        const auto& s = lj.at("schedule");
        if (!s.is_array()) fail(ErrorCode::ParseError, lw + ": schedule must be an array of [t_on, t_off]");
        for (const auto& iv : s) {
          if (!iv.is_array() || iv.size() != 2 || !iv[0].is_number() || !iv[1].is_number()) {
            fail(ErrorCode::ParseError, lw + ": schedule entries are [t_on, t_off]");
          }
          l.schedule.push_back({iv[0].get<double>(), iv[1].get<double>()});
        }
      }
      l.params = load_params_from(l.load_class, lj.value("params", json::object()), lw + ".params");
      sc.loads.push_back(std::move(l));
    }
    sc.validate();
    return sc;
  });
}

MachineScenario read_scenario(const std::filesystem::path& path) { return scenario_from_json(read_text_file(path)); }

// ------------------------------------------------------------------- config

namespace {

json config_json(const PipelineConfig& c) {
  const auto& u = c.ubr;
  return {
      {"enable_ubr", c.enable_ubr},
      {"enable_events", c.enable_events},
      {"enable_fsm", c.enable_fsm},
      {"nominal_frequency", c.nominal_frequency},
      {"harmonic_count", c.harmonic_count},
      {"seed", c.seed},
      {"ubr",
       {{"max_rectifiers", u.max_rectifiers},
        {"detection",
         {{"curvature_threshold", u.detection.curvature_threshold},
          {"average_periods", u.detection.average_periods},
          {"median_half", u.detection.median_half},
          {"scale_floor", u.detection.scale_floor}}},
        {"filter", {{"phase_tolerance", u.filter.phase_tolerance}, {"min_fit_fraction", u.filter.min_fit_fraction}}},
        {"interpolation",
         {{"margin", u.interpolation.margin},
          {"baseline_harmonics", u.interpolation.baseline_harmonics},
          {"max_condition", u.interpolation.max_condition},
          {"max_window_fraction", u.interpolation.max_window_fraction}}}}},
      {"steps", {{"threshold_w", c.steps.threshold_w}, {"settle_periods", c.steps.settle_periods}}},
      {"cluster", {{"rel_tol", c.cluster.rel_tol}, {"abs_tol_w", c.cluster.abs_tol_w}}},
      {"fsm",
       {{"candidates", c.fsm.candidates},
        {"min_abs_r", c.fsm.min_abs_r},
        {"smooth", c.fsm.smooth},
        {"step_fraction", c.fsm.step_fraction},
        {"step_guard", c.fsm.step_guard},
        {"step_window", c.fsm.step_window}}},
  };
}

PipelineConfig config_from(const json& j) {
  PipelineConfig c;
  const std::string w = "config";
  check_keys(j, {"enable_ubr", "enable_events", "enable_fsm", "nominal_frequency", "harmonic_count", "seed", "ubr",
                 "steps", "cluster", "fsm"},
             w);
  read_opt(j, "enable_ubr", c.enable_ubr, w);
  read_opt(j, "enable_events", c.enable_events, w);
  read_opt(j, "enable_fsm", c.enable_fsm, w);
  read_opt(j, "nominal_frequency", c.nominal_frequency, w);
  read_opt(j, "harmonic_count", c.harmonic_count, w);
  read_opt(j, "seed", c.seed, w);
  if (j.contains("ubr")) {
    const auto& u = j.at("ubr");
    check_keys(u, {"max_rectifiers", "detection", "filter", "interpolation"}, "config.ubr");
    read_opt(u, "max_rectifiers", c.ubr.max_rectifiers, "config.ubr");
    if (u.contains("detection")) {
      const auto& d = u.at("detection");
      const std::string dw = "config.ubr.detection";
      check_keys(d, {"curvature_threshold", "average_periods", "median_half", "scale_floor"}, dw);
      read_opt(d, "curvature_threshold", c.ubr.detection.curvature_threshold, dw);
      read_opt(d, "average_periods", c.ubr.detection.average_periods, dw);
      read_opt(d, "median_half", c.ubr.detection.median_half, dw);
      read_opt(d, "scale_floor", c.ubr.detection.scale_floor, dw);
    }
    if (u.contains("filter")) {
      const auto& f = u.at("filter");
      check_keys(f, {"phase_tolerance", "min_fit_fraction"}, "config.ubr.filter");
      read_opt(f, "phase_tolerance", c.ubr.filter.phase_tolerance, "config.ubr.filter");
      read_opt(f, "min_fit_fraction", c.ubr.filter.min_fit_fraction, "config.ubr.filter");
    }
    if (u.contains("interpolation")) {
      const auto& i = u.at("interpolation");
      const std::string iw = "config.ubr.interpolation";
      check_keys(i, {"margin", "baseline_harmonics", "max_condition", "max_window_fraction"}, iw);
      read_opt(i, "margin", c.ubr.interpolation.margin, iw);
      read_opt(i, "baseline_harmonics", c.ubr.interpolation.baseline_harmonics, iw);
      read_opt(i, "max_condition", c.ubr.interpolation.max_condition, iw);
      read_opt(i, "max_window_fraction", c.ubr.interpolation.max_window_fraction, iw);
    }
  }
  if (j.contains("steps")) {
    const auto& s = j.at("steps");
    check_keys(s, {"threshold_w", "settle_periods"}, "config.steps");
    read_opt(s, "threshold_w", c.steps.threshold_w, "config.steps");
    read_opt(s, "settle_periods", c.steps.settle_periods, "config.steps");
  }
  if (j.contains("cluster")) {
    const auto& s = j.at("cluster");
    check_keys(s, {"rel_tol", "abs_tol_w"}, "config.cluster");
    read_opt(s, "rel_tol", c.cluster.rel_tol, "config.cluster");
    read_opt(s, "abs_tol_w", c.cluster.abs_tol_w, "config.cluster");
  }
  if (j.contains("fsm")) {
    const auto& f = j.at("fsm");
    const std::string fw = "config.fsm";
    check_keys(f, {"candidates", "min_abs_r", "smooth", "step_fraction", "step_guard", "step_window"}, fw);
    read_opt(f, "candidates", c.fsm.candidates, fw);
    read_opt(f, "min_abs_r", c.fsm.min_abs_r, fw);
    read_opt(f, "smooth", c.fsm.smooth, fw);
    read_opt(f, "step_fraction", c.fsm.step_fraction, fw);
    read_opt(f, "step_guard", c.fsm.step_guard, fw);
    read_opt(f, "step_window", c.fsm.step_window, fw);
  }
  if (!(c.nominal_frequency > 0.0)) fail(ErrorCode::InvalidArgument, "config: nominal_frequency must be positive");
  if (!(c.steps.threshold_w > 0.0)) fail(ErrorCode::InvalidArgument, "config: steps.threshold_w must be positive");
  if (!(c.cluster.rel_tol > 0.0) || !(c.cluster.abs_tol_w > 0.0)) {
    fail(ErrorCode::InvalidArgument, "config: cluster tolerances must be positive");
  }
  if (c.ubr.max_rectifiers > 2) fail(ErrorCode::InvalidArgument, "config: ubr.max_rectifiers must be at most 2");
  return c;
}

}  // namespace

PipelineConfig config_from_json(std::string_view text) {
  return guarded("config", [&] { return config_from(parse_json(text, "config")); });
}

std::string config_to_json(const PipelineConfig& config) { return config_json(config).dump(2) + "\n"; }

PipelineConfig read_config(const std::filesystem::path& path) { return config_from_json(read_text_file(path)); }

// ------------------------------------------------------------------- report

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json evaluation_json(const EvaluationSummary& e) {
  json rows = json::array();
  for (const auto& r : e.rows) {
    rows.push_back({{"kind", r.kind},
                    {"estimate_id", r.estimate_id.empty() ? json(nullptr) : json(r.estimate_id)},
                    {"truth_ids", r.truth_ids},
                    {"e_est_wh", r.e_est},
                    {"e_true_wh", r.result.e_true},
                    {"delta_e_wh", r.result.delta_e},
                    {"accuracy", optional_number(r.result.acc)}});
  }
  return {{"schema_version", kEvaluationSchema},
          {"rows", rows},
          {"weighted_accuracy", optional_number(e.weighted_accuracy)},
          {"weighted_accuracy_with_false_positives", optional_number(e.weighted_accuracy_with_fp)},
          {"identified_energy_fraction", e.identified_energy_fraction}};
}

template <class T>
T need(const json& j, const char* key, const std::string& where) {
  return read_req<T>(j, key, where);
}

}  // namespace

std::string evaluation_to_json(const EvaluationSummary& evaluation) { return evaluation_json(evaluation).dump(2) + "\n"; }

std::string report_to_json(const DisaggregationReport& r, const EvaluationSummary* evaluation) {
  json j;
  j["schema_version"] = kReportSchema;
  j["sample_rate"] = r.sample_rate;
  j["periods"] = {{"t_start", r.period_t_start}, {"duration", r.period_duration}};
  j["aggregate_p"] = r.aggregate_p;
  j["unexplained_p"] = r.unexplained_p;
  j["estimates"] = json::array();
  for (const auto& e : r.estimates) {
    json ej;
    ej["id"] = e.id;
    ej["class"] = to_string(e.load_class);
    ej["source"] = to_string(e.source);
    ej["energy_wh"] = e.energy_wh;
    ej["power_factor"] = optional_number(e.power_factor);
    ej["thd"] = optional_number(e.thd);
    ej["label"] = e.label ? json(*e.label) : json(nullptr);
    if (e.fingerprint) {
      ej["fingerprint"] = {{"label", e.fingerprint->label},
                           {"confidence", e.fingerprint->confidence},
                           {"low_confidence", e.fingerprint->low_confidence}};
    } else {
      ej["fingerprint"] = nullptr;
    }
    json s = json::array();
    for (const auto& iv : e.schedule) s.push_back({iv.begin, iv.end});
    ej["schedule"] = s;
    ej["p_series"] = e.p_series;
    j["estimates"].push_back(std::move(ej));
  }
  json ubr = json::array();
  for (const auto& u : r.ubr_stage) ubr.push_back({{"kind", to_string(u.kind)}, {"agreement", u.agreement}});
  json fsm = nullptr;
  if (r.fsm_stage) {
    fsm = {{"harmonic_index", r.fsm_stage->harmonic_index},
           {"pearson_r", r.fsm_stage->pearson_r},
           {"slope", r.fsm_stage->slope},
           {"intercept", r.fsm_stage->intercept},
           {"samples", r.fsm_stage->samples}};
  }
  j["stages"] = {{"ubr", ubr},
                 {"events",
                  {{"events", r.event_stage.events},
                   {"clusters", r.event_stage.clusters},
                   {"unpaired", r.event_stage.unpaired}}},
                 {"fsm", fsm}};
  j["warnings"] = r.warnings;
  j["config"] = config_json(r.config);
  if (evaluation) j["evaluation"] = evaluation_json(*evaluation);
  return j.dump(2) + "\n";
}

DisaggregationReport report_from_json(std::string_view text) {
  return guarded("report", [&] {
    const json j = parse_json(text, "report");
    const std::string w = "report";
    if (!j.is_object()) fail(ErrorCode::ParseError, "report: expected an object");
    const auto schema = need<std::string>(j, "schema_version", w);
    if (schema != kReportSchema) fail(ErrorCode::ParseError, "report: unsupported schema_version " + schema);
    DisaggregationReport r;
    r.sample_rate = need<double>(j, "sample_rate", w);
    const auto& periods = j.at("periods");
    r.period_t_start = need<std::vector<double>>(periods, "t_start", "report.periods");
    r.period_duration = need<std::vector<double>>(periods, "duration", "report.periods");
    r.aggregate_p = need<std::vector<double>>(j, "aggregate_p", w);
    read_opt(j, "unexplained_p", r.unexplained_p, w);
    const std::size_t n = r.aggregate_p.size();
    if (r.period_t_start.size() != n || r.period_duration.size() != n) {
      fail(ErrorCode::LengthMismatch, "report: period arrays differ in length from aggregate_p");
    }
    for (const auto& ej : j.at("estimates")) {
      const std::string ew = "report.estimates[" + std::to_string(r.estimates.size()) + "]";
      LoadEstimate e;
      e.id = need<std::string>(ej, "id", ew);
      const auto cls = need<std::string>(ej, "class", ew);
      const auto src = need<std::string>(ej, "source", ew);
      const auto c = estimate_class_from_string(cls);
      const auto s = source_algorithm_from_string(src);
      if (!c) fail(ErrorCode::ParseError, ew + ": unknown class " + cls);
      if (!s) fail(ErrorCode::ParseError, ew + ": unknown source " + src);
      e.load_class = *c;
      e.source = *s;
      e.p_series = need<std::vector<double>>(ej, "p_series", ew);
      if (e.p_series.size() != n) fail(ErrorCode::LengthMismatch, ew + ": p_series length differs from aggregate_p");
      read_opt(ej, "energy_wh", e.energy_wh, ew);
      if (ej.contains("power_factor") && !ej.at("power_factor").is_null()) e.power_factor = need<double>(ej, "power_factor", ew);
      if (ej.contains("thd") && !ej.at("thd").is_null()) e.thd = need<double>(ej, "thd", ew);
      if (ej.contains("label") && !ej.at("label").is_null()) e.label = need<std::string>(ej, "label", ew);
      if (ej.contains("fingerprint") && !ej.at("fingerprint").is_null()) {
        const auto& f = ej.at("fingerprint");
        e.fingerprint = FingerprintLabel{need<std::string>(f, "label", ew), need<double>(f, "confidence", ew),
                                         need<bool>(f, "low_confidence", ew)};
      }
      if (ej.contains("schedule")) {
        for (const auto& iv : ej.at("schedule")) {
          if (!iv.is_array() || iv.size() != 2) fail(ErrorCode::ParseError, ew + ": schedule entries are [begin, end]");
          e.schedule.push_back({iv[0].get<std::size_t>(), iv[1].get<std::size_t>()});
        }
      }
      r.estimates.push_back(std::move(e));
    }
    if (j.contains("stages")) {
      const auto& st = j.at("stages");
      if (st.contains("ubr")) {
        for (const auto& u : st.at("ubr")) {
          const auto k = need<std::string>(u, "kind", "report.stages.ubr");
          UbrStageInfo info;
          info.kind = k == "three_phase" ? UbrKind::three_phase : k == "single_phase" ? UbrKind::single_phase : UbrKind::none;
          info.agreement = need<double>(u, "agreement", "report.stages.ubr");
          r.ubr_stage.push_back(info);
        }
      }
      if (st.contains("events")) {
        const auto& e = st.at("events");
        read_opt(e, "events", r.event_stage.events, "report.stages.events");
        read_opt(e, "clusters", r.event_stage.clusters, "report.stages.events");
        read_opt(e, "unpaired", r.event_stage.unpaired, "report.stages.events");
      }
      if (st.contains("fsm") && !st.at("fsm").is_null()) {
        const auto& f = st.at("fsm");
        const std::string fw = "report.stages.fsm";
        r.fsm_stage = HarmonicCorrelation{need<int>(f, "harmonic_index", fw), need<double>(f, "pearson_r", fw),
                                          need<double>(f, "slope", fw), need<double>(f, "intercept", fw),
                                          need<std::size_t>(f, "samples", fw)};
      }
    }
    read_opt(j, "warnings", r.warnings, w);
    if (j.contains("config")) r.config = config_from(j.at("config"));
    return r;
  });
}

DisaggregationReport read_report(const std::filesystem::path& path) { return report_from_json(read_text_file(path)); }

// -------------------------------------------------------------------- model

std::string model_to_json(const FingerprintModel& m) {
  json j;
  j["schema_version"] = kModelSchema;
  j["feature_names"] = m.feature_names;
  j["offset"] = m.offset;
  j["scale"] = m.scale;
  j["classes"] = m.classes;
  j["centroids"] = m.centroids;
  return j.dump(2) + "\n";
}

FingerprintModel model_from_json(std::string_view text) {
  return guarded("model", [&] {
    const json j = parse_json(text, "model");
    const std::string w = "model";
    check_keys(j, {"schema_version", "feature_names", "offset", "scale", "classes", "centroids"}, w);
    if (need<std::string>(j, "schema_version", w) != kModelSchema) fail(ErrorCode::ParseError, "model: unsupported schema");
    FingerprintModel m;
    m.feature_names = need<std::vector<std::string>>(j, "feature_names", w);
    m.offset = need<std::vector<double>>(j, "offset", w);
    m.scale = need<std::vector<double>>(j, "scale", w);
    m.classes = need<std::vector<std::string>>(j, "classes", w);
    m.centroids = need<std::vector<std::vector<double>>>(j, "centroids", w);
    const std::size_t d = m.feature_names.size();
    bool ok = m.offset.size() == d && m.scale.size() == d && m.centroids.size() == m.classes.size() && !m.classes.empty();
    for (const auto& c : m.centroids) ok = ok && c.size() == d;
    for (double s : m.scale) ok = ok && s > 0.0;
    if (!ok) fail(ErrorCode::ParseError, "model: inconsistent dimensions");
    return m;
  });
}

FingerprintModel read_model(const std::filesystem::path& path) { return model_from_json(read_text_file(path)); }

std::string samples_to_json(const std::vector<LabeledFeatures>& samples) {
  json j;
  j["schema_version"] = "nilm.samples/1";
  j["feature_names"] = transient_feature_names();
  j["samples"] = json::array();
  for (const auto& s : samples) j["samples"].push_back({{"label", s.label}, {"features", s.features.values}});
  return j.dump(2) + "\n";
}

std::vector<LabeledFeatures> samples_from_json(std::string_view text) {
  return guarded("samples", [&] {
    const json j = parse_json(text, "samples");
    const std::string w = "samples";
    check_keys(j, {"schema_version", "feature_names", "samples"}, w);
    const auto names = need<std::vector<std::string>>(j, "feature_names", w);
    if (names != transient_feature_names()) fail(ErrorCode::ParseError, "samples: feature set differs from this build");
    std::vector<LabeledFeatures> out;
    for (const auto& s : j.at("samples")) {
      LabeledFeatures f;
      f.label = need<std::string>(s, "label", w);
      f.features.values = need<std::vector<double>>(s, "features", w);
      if (f.features.values.size() != names.size()) fail(ErrorCode::ParseError, "samples: wrong feature count");
      out.push_back(std::move(f));
    }
    return out;
  });
}

// ---------------------------------------------------------------- plot data

void write_plot_data(const DisaggregationReport& report, const std::filesystem::path& dir, const TruthTable* truth) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
  const std::size_t n = report.num_periods();
  std::vector<NamedSeries> groups;
  if (truth) {
    groups = grouped_truth(*truth);
    for (const auto& g : groups) {
      if (g.p.size() != n) fail(ErrorCode::LengthMismatch, "truth period count differs from the report");
    }
  }
  {
    auto f = open_out(dir / "power.csv");
    f << "period,t_start_s,aggregate_w";
    for (const auto& e : report.estimates) f << ',' << e.id << "_w";
    f << ",unexplained_w";
    for (const auto& g : groups) f << ",truth_" << g.id << "_w";
    f << '\n';
    std::string row;
    for (std::size_t k = 0; k < n; ++k) {
      row = std::to_string(k);
      row.push_back(',');
      append_number(row, report.period_t_start[k]);
      row.push_back(',');
      append_number(row, report.aggregate_p[k]);
      for (const auto& e : report.estimates) {
        row.push_back(',');
        append_number(row, e.p_series[k]);
      }
      row.push_back(',');
      append_number(row, k < report.unexplained_p.size() ? report.unexplained_p[k] : 0.0);
      for (const auto& g : groups) {
        row.push_back(',');
        append_number(row, g.p[k]);
      }
      row.push_back('\n');
      f << row;
    }
    if (!f) fail(ErrorCode::IoError, "write failed: power.csv");
  }
  auto f = open_out(dir / "energy.csv");
  const double total = energy_wh(report.aggregate_p, report.period_duration);
  f << "id,class,source,energy_wh,share\n";
  for (const auto& e : report.estimates) {
    std::string row = e.id + "," + std::string(to_string(e.load_class)) + "," + std::string(to_string(e.source)) + ",";
    append_number(row, e.energy_wh);
    row.push_back(',');
    append_number(row, total > 0.0 ? e.energy_wh / total : 0.0);
    f << row << '\n';
  }
  if (!f) fail(ErrorCode::IoError, "write failed: energy.csv");
}

// ------------------------------------------------------------------- errors

std::string error_to_json(std::string_view code, std::string_view message) {
  json j;
  j["error"] = {{"code", code}, {"message", message}};
  return j.dump();
}

std::string error_to_json(const Error& error) { return error_to_json(to_string(error.code()), error.what()); }

}  // namespace nilm::io

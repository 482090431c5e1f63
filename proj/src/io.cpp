#include "scabd/io.hpp"

#include <charconv>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace scabd {

using json = nlohmann::ordered_json;

namespace {

json ts_json(const std::optional<Timestamp>& ts) {
  if (!ts) return nullptr;
  return json::array({ts->lt, ts->pid});
}

template <class T>
T get_int(const json& j, const char* field, std::size_t line) {
  if (!j.contains(field)) throw ParseError(line, std::string("missing field \"") + field + "\"");
  const json& v = j.at(field);
  if (!v.is_number_integer()) {
    throw ParseError(line, std::string("field \"") + field + "\" must be an integer");
  }
  if constexpr (std::is_unsigned_v<T>) {
    if (v.is_number_unsigned()) return v.get<T>();
    if (v.get<std::int64_t>() < 0) {
      throw ParseError(line, std::string("field \"") + field + "\" must be non-negative");
    }
  }
  return v.get<T>();
}

template <class T>
std::optional<T> get_optional_int(const json& j, const char* field, std::size_t line) {
  if (!j.contains(field) || j.at(field).is_null()) return std::nullopt;
  return get_int<T>(j, field, line);
}

std::string get_string(const json& j, const char* field, std::size_t line) {
  if (!j.contains(field) || !j.at(field).is_string()) {
    throw ParseError(line, std::string("field \"") + field + "\" must be a string");
  }
  return j.at(field).get<std::string>();
}

std::optional<Timestamp> get_ts(const json& j, const char* field, std::size_t line) {
  if (!j.contains(field) || j.at(field).is_null()) return std::nullopt;
  const json& v = j.at(field);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer() ||
      v[0].get<std::int64_t>() < 0) {
    throw ParseError(line, std::string("field \"") + field + "\" must be [lt, pid]");
  }
  return Timestamp{v[0].get<LogicalTime>(), v[1].get<ProcessId>()};
}

json parse_object(const std::string& line, std::size_t line_no) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(line_no, std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError(line_no, "expected a JSON object");
  return j;
}

bool blank(const std::string& line) {
  return line.find_first_not_of(" \t\r") == std::string::npos;
}

}  // namespace

// ---------------------------------------------------------------------------
// History files

std::string to_json_line(const Event& e) {
  json j;
  j["kind"] = std::string(to_string(e.kind));
  j["opid"] = e.opid;
  j["proc"] = e.proc;
  j["op"] = std::string(to_string(e.op));
  j["reg"] = e.reg;
  j["val"] = e.val ? json(*e.val) : json(nullptr);
  if (e.kind == EventKind::invocation) {
    j["ret"] = nullptr;
  } else if (e.op == OpKind::write) {
    j["ret"] = "OK";
  } else {
    j["ret"] = e.ret ? json(*e.ret) : json(nullptr);
  }
  j["rt"] = e.rt;
  j["lt"] = e.lt ? json(*e.lt) : json(nullptr);
  j["ts"] = ts_json(e.ts);
  return j.dump();
}

Event event_from_json_line(const std::string& line, std::size_t line_no) {
  json j = parse_object(line, line_no);
  Event e;
  std::string kind = get_string(j, "kind", line_no);
  if (kind == "inv") e.kind = EventKind::invocation;
  else if (kind == "res") e.kind = EventKind::response;
  else throw ParseError(line_no, "kind must be \"inv\" or \"res\"");
  e.opid = get_int<OpId>(j, "opid", line_no);
  e.proc = get_int<ProcessId>(j, "proc", line_no);
  if (e.proc < 1) throw ParseError(line_no, "proc must be at least 1");
  std::string op = get_string(j, "op", line_no);
  if (op == "read") e.op = OpKind::read;
  else if (op == "write") e.op = OpKind::write;
  else throw ParseError(line_no, "op must be \"read\" or \"write\"");
  e.reg = get_string(j, "reg", line_no);
  if (e.reg.empty()) throw ParseError(line_no, "reg must be non-empty");
  e.val = get_optional_int<Value>(j, "val", line_no);
  if (e.op == OpKind::write && !e.val) throw ParseError(line_no, "write needs an integer val");

  const json* ret = j.contains("ret") ? &j.at("ret") : nullptr;
  if (e.kind == EventKind::response) {
    if (e.op == OpKind::write) {
      if (!ret || !ret->is_string() || ret->get<std::string>() != "OK") {
        throw ParseError(line_no, "write response needs ret \"OK\"");
      }
    } else {
      if (!ret || !ret->is_number_integer()) {
        throw ParseError(line_no, "read response needs an integer ret");
      }
      e.ret = ret->get<Value>();
    }
  } else if (ret && !ret->is_null()) {
    throw ParseError(line_no, "invocation must have ret null");
  }
  e.rt = get_int<Tick>(j, "rt", line_no);
  e.lt = get_optional_int<LogicalTime>(j, "lt", line_no);
  e.ts = get_ts(j, "ts", line_no);
  return e;
}

void write_history(std::ostream& out, const History& h) {
  for (const Event& e : h) out << to_json_line(e) << '\n';
}

History read_history(std::istream& in) {
  History h;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    h.push_back(event_from_json_line(line, line_no));
  }
  return h;
}

// ---------------------------------------------------------------------------
// Message log

std::string to_json_line(const MessageRecord& m) {
  json j;
  j["from"] = m.msg.sender;
  j["to"] = m.msg.receiver;
  j["type"] = std::string(m.msg.type_name());
  j["lt"] = m.msg.lt();
  j["rid"] = m.msg.rid();
  std::visit(
      [&](const auto& body) {
        using T = std::decay_t<decltype(body)>;
        if constexpr (std::is_same_v<T, Query> || std::is_same_v<T, Update>) j["reg"] = body.reg;
        if constexpr (std::is_same_v<T, Response> || std::is_same_v<T, Update>) {
          j["ts"] = ts_json(body.tsv.ts);
          j["val"] = body.tsv.val;
        }
      },
      m.msg.body);
  j["send_rt"] = m.send_rt;
  j["send_step"] = m.send_step;
  if (m.recv) {
    j["recv_rt"] = m.recv->rt;
    j["handled"] = m.recv->handled;
    j["recv_step"] = m.recv->handled ? json(m.recv->step) : json(nullptr);
    j["recv_lt"] = m.recv->handled ? json(m.recv->lt) : json(nullptr);
  } else {
    j["recv_rt"] = nullptr;
    j["handled"] = false;
    j["recv_step"] = nullptr;
    j["recv_lt"] = nullptr;
  }
  j["dropped"] = m.dropped;
  return j.dump();
}

MessageRecord message_from_json_line(const std::string& line, std::size_t line_no) {
  json j = parse_object(line, line_no);
  MessageRecord m;
  m.msg.sender = get_int<ProcessId>(j, "from", line_no);
  m.msg.receiver = get_int<ProcessId>(j, "to", line_no);
  std::string type = get_string(j, "type", line_no);
  auto lt = get_int<LogicalTime>(j, "lt", line_no);
  auto rid = get_int<RequestId>(j, "rid", line_no);
  auto tsv = [&] {
    auto ts = get_ts(j, "ts", line_no);
    if (!ts) throw ParseError(line_no, type + " needs ts");
    return TimestampValuePair{*ts, get_int<Value>(j, "val", line_no)};
  };
  if (type == "query") m.msg.body = Query{lt, rid, get_string(j, "reg", line_no)};
  else if (type == "response") m.msg.body = Response{lt, rid, tsv()};
  else if (type == "update") m.msg.body = Update{lt, rid, get_string(j, "reg", line_no), tsv()};
  else if (type == "ack") m.msg.body = Ack{lt, rid};
  else throw ParseError(line_no, "unknown message type \"" + type + "\"");
  m.send_rt = get_int<Tick>(j, "send_rt", line_no);
  m.send_step = get_int<std::uint64_t>(j, "send_step", line_no);
  if (auto recv_rt = get_optional_int<Tick>(j, "recv_rt", line_no)) {
    Receipt r;
    r.rt = *recv_rt;
    r.handled = j.value("handled", false);
    r.step = get_optional_int<std::uint64_t>(j, "recv_step", line_no).value_or(0);
    r.lt = get_optional_int<LogicalTime>(j, "recv_lt", line_no).value_or(0);
    m.recv = r;
  }
  m.dropped = j.value("dropped", false);
  return m;
}

void write_message_log(std::ostream& out, const std::vector<MessageRecord>& log) {
  for (const MessageRecord& m : log) out << to_json_line(m) << '\n';
}

std::vector<MessageRecord> read_message_log(std::istream& in) {
  std::vector<MessageRecord> log;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    log.push_back(message_from_json_line(line, line_no));
  }
  return log;
}

std::filesystem::path sidecar_path(const std::filesystem::path& history) {
  std::filesystem::path out = history;
  out.replace_extension(".msgs.jsonl");
  return out;
}

// ---------------------------------------------------------------------------
// Run configuration

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

template <class T>
T to_number(const std::string& s, const std::string& key, std::size_t line) {
  T v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw ConfigError("line " + std::to_string(line) + ": " + key + " expects an integer, got \"" +
                      s + "\"");
  }
  return v;
}

double to_double(const std::string& s, const std::string& key, std::size_t line) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError("line " + std::to_string(line) + ": " + key + " expects a number, got \"" + s +
                    "\"");
}

bool to_bool(const std::string& s, const std::string& key, std::size_t line) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigError("line " + std::to_string(line) + ": " + key + " expects true or false");
}

std::string shortest(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string tick_text(Tick t) {
  return t == std::numeric_limits<Tick>::max() ? "inf" : std::to_string(t);
}

}  // namespace

SimConfig parse_config(std::istream& in) {
  SimConfig cfg;
  std::string delay_mode = "uniform";
  UniformDelay uniform;
  PerLinkDelay per_link;
  std::vector<AdversarialRule> rules;
  bool saw_link_default = false;
  std::set<std::string> seen;

  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    bool repeatable = key == "crash" || key == "link" || key == "rule" || key == "op";
    if (!repeatable && !seen.insert(key).second) {
      throw ConfigError("line " + std::to_string(line_no) + ": duplicate key " + key);
    }

    if (key == "n") {
      cfg.n = to_number<int>(value, key, line_no);
    } else if (key == "seed") {
      cfg.seed = to_number<std::uint64_t>(value, key, line_no);
    } else if (key == "protocol") {
      auto p = parse_protocol(value);
      if (!p) throw ConfigError("line " + std::to_string(line_no) + ": unknown protocol " + value);
      cfg.protocol = *p;
    } else if (key == "mutant") {
      auto m = parse_mutant(value);
      if (!m) throw ConfigError("line " + std::to_string(line_no) + ": unknown mutant " + value);
      cfg.mutant = *m;
    } else if (key == "mid_op_crash") {
      cfg.mid_op_crash = to_bool(value, key, line_no);
    } else if (key == "max_ticks") {
      cfg.max_ticks = to_number<Tick>(value, key, line_no);
    } else if (key == "delay") {
      if (value != "uniform" && value != "per_link" && value != "adversarial") {
        throw ConfigError("line " + std::to_string(line_no) + ": unknown delay model " + value);
      }
      delay_mode = value;
    } else if (key == "delay_min") {
      uniform.min = to_number<Tick>(value, key, line_no);
    } else if (key == "delay_max") {
      uniform.max = to_number<Tick>(value, key, line_no);
    } else if (key == "link_default") {
      per_link.fallback = to_number<Tick>(value, key, line_no);
      saw_link_default = true;
    } else if (key == "link") {
      auto f = split(value, ',');
      if (f.size() != 3) throw ConfigError("line " + std::to_string(line_no) + ": link = from,to,delay");
      per_link.links[{to_number<ProcessId>(f[0], key, line_no), to_number<ProcessId>(f[1], key, line_no)}] =
          to_number<Tick>(f[2], key, line_no);
    } else if (key == "rule") {
      auto f = split(value, ',');
      if (f.size() != 5) {
        throw ConfigError("line " + std::to_string(line_no) + ": rule = from,to,start,end,delay");
      }
      AdversarialRule r;
      r.from = to_number<ProcessId>(f[0], key, line_no);
      r.to = to_number<ProcessId>(f[1], key, line_no);
      r.start = to_number<Tick>(f[2], key, line_no);
      r.end = f[3] == "inf" ? std::numeric_limits<Tick>::max() : to_number<Tick>(f[3], key, line_no);
      r.delay = to_number<Tick>(f[4], key, line_no);
      rules.push_back(r);
    } else if (key == "crash") {
      auto at = value.find('@');
      if (at == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": crash = pid@tick");
      cfg.crashes.push_back(CrashSpec{to_number<ProcessId>(trim(value.substr(0, at)), key, line_no),
                                      to_number<Tick>(trim(value.substr(at + 1)), key, line_no)});
    } else if (key == "ops_per_process") {
      cfg.workload.ops_per_process = to_number<int>(value, key, line_no);
    } else if (key == "read_fraction") {
      cfg.workload.read_fraction = to_double(value, key, line_no);
    } else if (key == "register_count") {
      cfg.workload.register_count = to_number<int>(value, key, line_no);
    } else if (key == "think_time") {
      cfg.workload.think_time = to_number<Tick>(value, key, line_no);
    } else if (key == "op") {
      auto f = split(value, ',');
      if (f.size() != 5) {
        throw ConfigError("line " + std::to_string(line_no) + ": op = pid,read|write,reg,value,tick");
      }
      ScriptedOp op;
      op.proc = to_number<ProcessId>(f[0], key, line_no);
      if (f[1] == "read") op.kind = OpKind::read;
      else if (f[1] == "write") op.kind = OpKind::write;
      else throw ConfigError("line " + std::to_string(line_no) + ": op kind must be read or write");
      op.reg = f[2];
      if (op.kind == OpKind::write) op.value = to_number<Value>(f[3], key, line_no);
      else if (!f[3].empty()) throw ConfigError("line " + std::to_string(line_no) + ": reads take no value");
      op.not_before = f[4].empty() ? 0 : to_number<Tick>(f[4], key, line_no);
      cfg.workload.script.push_back(std::move(op));
    } else {
      throw ConfigError("line " + std::to_string(line_no) + ": unknown key " + key);
    }
  }

  if (delay_mode != "per_link" && (!per_link.links.empty() || saw_link_default)) {
    throw ConfigError("link and link_default need delay = per_link");
  }
  if (delay_mode != "adversarial" && !rules.empty()) {
    throw ConfigError("rule needs delay = adversarial");
  }
  if (delay_mode == "uniform") cfg.delay = uniform;
  else if (delay_mode == "per_link") cfg.delay = per_link;
  else cfg.delay = AdversarialSchedule{std::move(rules), uniform};
  validate_config(cfg);
  return cfg;
}

std::string format_config(const SimConfig& cfg) {
  std::ostringstream out;
  out << "n = " << cfg.n << '\n'
      << "seed = " << cfg.seed << '\n'
      << "protocol = " << to_string(cfg.protocol) << '\n'
      << "mutant = " << to_string(cfg.mutant) << '\n'
      << "mid_op_crash = " << (cfg.mid_op_crash ? "true" : "false") << '\n'
      << "max_ticks = " << cfg.max_ticks << '\n';
  std::visit(
      [&](const auto& d) {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, UniformDelay>) {
          out << "delay = uniform\ndelay_min = " << d.min << "\ndelay_max = " << d.max << '\n';
        } else if constexpr (std::is_same_v<T, PerLinkDelay>) {
          out << "delay = per_link\nlink_default = " << d.fallback << '\n';
          for (const auto& [link, delay] : d.links) {
            out << "link = " << link.first << ',' << link.second << ',' << delay << '\n';
          }
        } else {
          out << "delay = adversarial\ndelay_min = " << d.fallback.min
              << "\ndelay_max = " << d.fallback.max << '\n';
          for (const AdversarialRule& r : d.rules) {
            out << "rule = " << r.from << ',' << r.to << ',' << r.start << ',' << tick_text(r.end)
                << ',' << r.delay << '\n';
          }
        }
      },
      cfg.delay);
  for (const CrashSpec& c : cfg.crashes) out << "crash = " << c.pid << '@' << c.at << '\n';
  const Workload& w = cfg.workload;
  out << "ops_per_process = " << w.ops_per_process << '\n'
      << "read_fraction = " << shortest(w.read_fraction) << '\n'
      << "register_count = " << w.register_count << '\n'
      << "think_time = " << w.think_time << '\n';
  for (const ScriptedOp& op : w.script) {
    out << "op = " << op.proc << ',' << to_string(op.kind) << ',' << op.reg << ','
        << (op.kind == OpKind::write ? std::to_string(op.value) : std::string()) << ','
        << op.not_before << '\n';
  }
  return out.str();
}

}  // namespace scabd

#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "scabd/core.hpp"
#include "scabd/simnet.hpp"

namespace scabd {

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// History files: JSON lines, one event per line, fields in the fixed order
// kind, opid, proc, op, reg, val, ret, rt, lt, ts.

std::string to_json_line(const Event& e);
Event event_from_json_line(const std::string& line, std::size_t line_no = 1);

void write_history(std::ostream& out, const History& h);
/// Throws ParseError. Blank lines are skipped.
History read_history(std::istream& in);

// Message-log sidecar: one handled, stale or dropped message per line.

std::string to_json_line(const MessageRecord& m);
MessageRecord message_from_json_line(const std::string& line, std::size_t line_no = 1);

void write_message_log(std::ostream& out, const std::vector<MessageRecord>& log);
std::vector<MessageRecord> read_message_log(std::istream& in);

/// "runs/a.jsonl" -> "runs/a.msgs.jsonl".
std::filesystem::path sidecar_path(const std::filesystem::path& history);

// Run configuration: `key = value` lines, `#` starts a comment. Repeatable
// keys: crash, link, rule, op. Unknown keys are rejected with ConfigError.

SimConfig parse_config(std::istream& in);
std::string format_config(const SimConfig& cfg);

}  // namespace scabd

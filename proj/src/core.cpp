#include "scabd/core.hpp"

#include <algorithm>
#include <map>
#include <unordered_map>

namespace scabd {

std::strong_ordering compare_timestamps(const Timestamp& a, const Timestamp& b) {
  if (auto c = a.lt <=> b.lt; c != 0) return c;
  return a.pid <=> b.pid;
}

int quorum_size(int n) {
  if (n < 1) throw std::invalid_argument("quorum_size: n must be at least 1");
  return n / 2 + 1;
}

LogicalTime Message::lt() const {
  return std::visit([](const auto& m) { return m.lt; }, body);
}

RequestId Message::rid() const {
  return std::visit([](const auto& m) { return m.rid; }, body);
}

std::string_view Message::type_name() const {
  static constexpr std::string_view kNames[] = {"query", "response", "update", "ack"};
  return kNames[body.index()];
}

bool Message::is_request() const {
  return std::holds_alternative<Query>(body) || std::holds_alternative<Update>(body);
}

std::string_view to_string(EventKind k) {
  return k == EventKind::invocation ? "inv" : "res";
}

std::string_view to_string(OpKind k) { return k == OpKind::read ? "read" : "write"; }

std::vector<Operation> collect_operations(const History& h) {
  std::vector<Operation> ops;
  std::unordered_map<OpId, std::size_t> index;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const Event& e = h[i];
    if (e.kind == EventKind::invocation) {
      if (index.contains(e.opid)) {
        throw HistoryError("operation " + std::to_string(e.opid) + " invoked twice");
      }
      Operation op;
      op.opid = e.opid;
      op.proc = e.proc;
      op.kind = e.op;
      op.reg = e.reg;
      op.arg = e.val;
      op.ts = e.ts;
      op.inv_index = i;
      if (op.kind == OpKind::write && !op.arg) {
        throw HistoryError("write " + std::to_string(e.opid) + " has no argument");
      }
      index.emplace(e.opid, ops.size());
      ops.push_back(std::move(op));
      continue;
    }
    auto it = index.find(e.opid);
    if (it == index.end()) {
      throw HistoryError("response for operation " + std::to_string(e.opid) +
                         " precedes its invocation");
    }
    Operation& op = ops[it->second];
    if (op.res_index) {
      throw HistoryError("operation " + std::to_string(e.opid) + " has two responses");
    }
    if (e.proc != op.proc || e.reg != op.reg || e.op != op.kind) {
      throw HistoryError("response for operation " + std::to_string(e.opid) +
                         " does not match its invocation");
    }
    if (op.kind == OpKind::read && !e.ret) {
      throw HistoryError("read " + std::to_string(e.opid) + " responded without a value");
    }
    op.ret = e.ret;
    if (e.ts) op.ts = e.ts;
    op.res_index = i;
  }
  return ops;
}

void validate_history(const History& h, bool require_complete) {
  std::map<ProcessId, std::optional<OpId>> outstanding;
  for (const Event& e : h) {
    if (e.proc < 1) throw HistoryError("event with invalid process id " + std::to_string(e.proc));
    if (e.reg.empty()) throw HistoryError("event with empty register id");
    auto& open = outstanding[e.proc];
    if (e.kind == EventKind::invocation) {
      if (open) {
        throw HistoryError("process " + std::to_string(e.proc) +
                           " invoked an operation while another is outstanding");
      }
      open = e.opid;
    } else {
      if (!open || *open != e.opid) {
        throw HistoryError("process " + std::to_string(e.proc) +
                           " has a response without a matching invocation");
      }
      open.reset();
    }
  }
  collect_operations(h);
  if (require_complete) {
    for (const auto& [p, open] : outstanding) {
      if (open) {
        throw HistoryError("operation " + std::to_string(*open) + " at process " +
                           std::to_string(p) + " is pending");
      }
    }
  }
}

History project_process(const History& h, ProcessId p) {
  History out;
  std::copy_if(h.begin(), h.end(), std::back_inserter(out),
               [p](const Event& e) { return e.proc == p; });
  return out;
}

History project_register(const History& h, const RegisterId& x) {
  History out;
  std::copy_if(h.begin(), h.end(), std::back_inserter(out),
               [&x](const Event& e) { return e.reg == x; });
  return out;
}

namespace {

using EventKey = std::pair<OpId, EventKind>;

std::map<ProcessId, std::vector<EventKey>> per_process_keys(const History& h) {
  std::map<ProcessId, std::vector<EventKey>> out;
  for (const Event& e : h) out[e.proc].emplace_back(e.opid, e.kind);
  return out;
}

}  // namespace

bool histories_equivalent(const History& a, const History& b) {
  return per_process_keys(a) == per_process_keys(b);
}

std::vector<ProcessId> processes_of(const History& h) {
  std::vector<ProcessId> out;
  for (const Event& e : h) {
    if (std::find(out.begin(), out.end(), e.proc) == out.end()) out.push_back(e.proc);
  }
  return out;
}

std::vector<RegisterId> registers_of(const History& h) {
  std::vector<RegisterId> out;
  for (const Event& e : h) {
    if (std::find(out.begin(), out.end(), e.reg) == out.end()) out.push_back(e.reg);
  }
  return out;
}

}  // namespace scabd

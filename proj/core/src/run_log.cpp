#include "comm_arena/run_log.hpp"

#include <fstream>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "comm_arena/error.hpp"

namespace comm_arena {

namespace {

constexpr const char* kHeader =
    "epoch,mean_predator_reward,mean_prey_reward,epsilon,dial_loss,iql_loss_prey,iql_loss_pred";

std::string field(const std::optional<double>& v) {
  return v ? fmt::format("{}", *v) : std::string();
}

double parse_double(const std::string& text, int line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw InvalidInput("run log line " + std::to_string(line) + ": bad number '" + text + "'");
  }
}

}  // namespace

void write_run_log_csv(std::ostream& out, const RunLog& log) {
  out << kHeader << '\n';
  for (const auto& r : log) {
    out << fmt::format("{},{},{},{},{},{},{}\n", r.epoch, r.mean_predator_reward,
                       r.mean_prey_reward, r.epsilon, field(r.dial_loss),
                       field(r.iql_loss_prey), field(r.iql_loss_pred));
  }
}

void write_run_log_csv(const std::filesystem::path& path, const RunLog& log) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_run_log_csv(out, log);
}

RunLog read_run_log_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kHeader) {
    throw InvalidInput("run log: missing or unexpected header");
  }
  RunLog log;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (cells.size() != 7) {
      throw InvalidInput("run log line " + std::to_string(line_no) + ": expected 7 fields");
    }
    EpochRecord r;
    r.epoch = static_cast<int>(parse_double(cells[0], line_no));
    r.mean_predator_reward = parse_double(cells[1], line_no);
    r.mean_prey_reward = parse_double(cells[2], line_no);
    r.epsilon = parse_double(cells[3], line_no);
    auto opt = [&](const std::string& c) -> std::optional<double> {
      if (c.empty()) return std::nullopt;
      return parse_double(c, line_no);
    };
    r.dial_loss = opt(cells[4]);
    r.iql_loss_prey = opt(cells[5]);
    r.iql_loss_pred = opt(cells[6]);
    if (r.epoch != static_cast<int>(log.size())) {
      throw InvalidInput("run log line " + std::to_string(line_no) +
                         ": epochs must be contiguous from 0");
    }
    log.push_back(r);
  }
  return log;
}

RunLog read_run_log_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot read run log " + path.string());
  return read_run_log_csv(in);
}

}  // namespace comm_arena

#include <sstream>

#include <nlohmann/json.hpp>

#include "cadnet/training.hpp"

namespace cadnet {

namespace {

std::string num(double v) {
  std::ostringstream s;
  s.precision(9);
  s << v;
  return s.str();
}

}  // namespace

std::string report_to_csv(const TrainReport& report) {
  std::string out = "epoch,train_loss,train_acc,val_loss,val_acc,seconds\n";
  for (const EpochRow& r : report.rows) {
    out += std::to_string(r.epoch) + "," + num(r.train_loss) + "," +
           num(r.train_acc) + "," + num(r.val_loss) + "," + num(r.val_acc) +
           "," + num(r.seconds) + "\n";
  }
  return out;
}

std::string report_to_json(const TrainReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const EpochRow& r : report.rows) {
    nlohmann::json row;
    row["epoch"] = r.epoch;
    row["train_loss"] = r.train_loss;
    row["train_acc"] = r.train_acc;
    row["val_loss"] = r.val_loss;
    row["val_acc"] = r.val_acc;
    row["seconds"] = r.seconds;
    rows.push_back(std::move(row));
  }
  nlohmann::json j;
  j["epochs"] = std::move(rows);
  return j.dump(2) + "\n";
}

}  // namespace cadnet

// SPDX-License-Identifier: Apache-2.0
#pragma once

// Flat key=value run configuration. One pair per line; '#' starts a comment
// and blank lines are ignored; unknown keys are rejected.

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <type_traits>

#include "glsr/errors.hpp"
#include "glsr/model.hpp"
#include "glsr/train.hpp"

namespace glsr {

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  std::size_t synth_count = 64;   // training images when --data synthetic
  std::size_t synth_size = 64;
  std::size_t eval_count = 16;    // held-out synthetic images (seed + 1)
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename U>
U parse_number(const std::string& key, const std::string& v) {
  U out{};
  if constexpr (std::is_floating_point_v<U>) {
    std::size_t used = 0;
    try {
      out = static_cast<U>(std::stod(v, &used));
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != v.size() || v.empty()) throw ConfigError("config: " + key + " expects a number, got '" + v + "'");
  } else {
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
      throw ConfigError("config: " + key + " expects a non-negative integer, got '" + v + "'");
    }
  }
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw ConfigError("config: " + key + " expects true/false, got '" + v + "'");
}

}  // namespace detail

inline RunConfig parse_run_config(std::istream& in) {
  RunConfig rc;
  using Setter = std::function<void(const std::string&, const std::string&)>;
  auto sz = [](std::size_t& f) -> Setter { return [&f](const auto& k, const auto& v) { f = detail::parse_number<std::size_t>(k, v); }; };
  auto dbl = [](double& f) -> Setter { return [&f](const auto& k, const auto& v) { f = detail::parse_number<double>(k, v); }; };
  auto flag = [](bool& f) -> Setter { return [&f](const auto& k, const auto& v) { f = detail::parse_bool(k, v); }; };
  const std::map<std::string, Setter> setters = {
      {"channels", sz(rc.model.channels)},
      {"blocks", sz(rc.model.blocks)},
      {"scale", sz(rc.model.scale)},
      {"scam", flag(rc.model.enable_scam)},
      {"cfc", flag(rc.model.enable_cfc)},
      {"glie", flag(rc.model.enable_glie)},
      {"steps", sz(rc.train.total_steps)},
      {"batch", sz(rc.train.batch)},
      {"lr_patch", sz(rc.train.lr_patch)},
      {"lr_start", dbl(rc.train.lr_start)},
      {"lr_end", dbl(rc.train.lr_end)},
      {"beta1", dbl(rc.train.beta1)},
      {"beta2", dbl(rc.train.beta2)},
      {"adam_eps", dbl(rc.train.adam_eps)},
      {"gamma", dbl(rc.train.gamma)},
      {"seed", [&rc](const auto& k, const auto& v) { rc.train.seed = detail::parse_number<std::uint64_t>(k, v); }},
      {"schedule",
       [&rc](const auto& k, const auto& v) {
         if (v == "cosine") rc.train.schedule = Schedule::cosine;
         else if (v == "step") rc.train.schedule = Schedule::step;
         else throw ConfigError("config: " + k + " must be cosine or step, got '" + v + "'");
       }},
      {"step_interval", sz(rc.train.step_interval)},
      {"step_decay", dbl(rc.train.step_decay)},
      {"eval_interval", sz(rc.train.eval_interval)},
      {"augment", flag(rc.train.augment)},
      {"synth_count", sz(rc.synth_count)},
      {"synth_size", sz(rc.synth_size)},
      {"eval_count", sz(rc.eval_count)},
  };

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = detail::trim(line.substr(0, line.find('#')));
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = detail::trim(t.substr(0, eq));
    const std::string value = detail::trim(t.substr(eq + 1));
    auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    it->second(key, value);
  }
  rc.model.validate();
  rc.train.validate();
  return rc;
}

inline RunConfig parse_run_config(const std::string& text) {
  std::istringstream in(text);
  return parse_run_config(in);
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  return parse_run_config(in);
}

}  // namespace glsr

#include "prompts.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>

#include "errors.hpp"
#include "util.hpp"

#ifndef ILR_DEFAULT_PROMPTS_DIR
#define ILR_DEFAULT_PROMPTS_DIR "prompts"
#endif

namespace ilr {

static const char* kCanonicalNames[] = {
    prompt_names::ranking_1,
    prompt_names::ranking_2,
    prompt_names::ranking_3,
    prompt_names::ranking_format,
    prompt_names::idea_sharing,
    prompt_names::analysis_cooperation,
    prompt_names::analysis_competition,
    prompt_names::idea_fusion,
    prompt_names::debate,
    prompt_names::summarization,
};

PromptTemplate parse_template(const std::string& name, const std::string& body) {
  PromptTemplate t;
  t.name = name;
  t.body = body;
  std::size_t pos = 0;
  while ((pos = body.find("<<", pos)) != std::string::npos) {
    std::size_t end = body.find(">>", pos + 2);
    if (end == std::string::npos) {
      raise(ErrorCode::parse,
            "template '" + name + "': unterminated slot marker at offset " +
                std::to_string(pos));
    }
    std::string slot = body.substr(pos + 2, end - pos - 2);
    if (slot.empty() || slot.find_first_of(" \t\n<>") != std::string::npos) {
      raise(ErrorCode::parse,
            "template '" + name + "': bad slot name '" + slot + "'");
    }
    if (std::find(t.required_slots.begin(), t.required_slots.end(), slot) ==
        t.required_slots.end()) {
      t.required_slots.push_back(slot);
    }
    pos = end + 2;
  }
  return t;
}

std::string render(const PromptTemplate& tmpl,
                   const std::map<std::string, std::string>& slots) {
  for (const auto& slot : tmpl.required_slots) {
    if (!slots.count(slot)) {
      raise(ErrorCode::invalid_argument,
            "template '" + tmpl.name + "': missing slot '" + slot + "'");
    }
  }
  for (const auto& [key, value] : slots) {
    (void)value;
    if (std::find(tmpl.required_slots.begin(), tmpl.required_slots.end(), key) ==
        tmpl.required_slots.end()) {
      raise(ErrorCode::invalid_argument,
            "template '" + tmpl.name + "': unknown slot '" + key + "'");
    }
  }
  std::string out = tmpl.body;
  for (const auto& [key, value] : slots) {
    replace_all(out, "<<" + key + ">>", value);
  }
  return out;
}

PromptLibrary PromptLibrary::load(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) {
    raise(ErrorCode::io, "prompt directory not found: " + dir);
  }
  PromptLibrary lib;
  for (const char* name : kCanonicalNames) {
    fs::path file = fs::path(dir) / (std::string(name) + ".txt");
    if (!fs::is_regular_file(file)) {
      raise(ErrorCode::io, "missing prompt template file: " + file.string());
    }
    std::string body = read_text_file(file.string());
    if (!body.empty() && body.back() == '\n') body.pop_back();
    lib.templates_[name] = parse_template(name, body);
  }
  return lib;
}

std::string PromptLibrary::default_dir() {
  if (const char* env = std::getenv("ILR_PROMPTS_DIR"); env && *env) {
    return env;
  }
  return ILR_DEFAULT_PROMPTS_DIR;
}

const PromptTemplate& PromptLibrary::get(const std::string& name) const {
  auto it = templates_.find(name);
  if (it == templates_.end()) {
    raise(ErrorCode::invalid_argument, "unknown prompt template: " + name);
  }
  return it->second;
}

std::vector<std::string> PromptLibrary::names() const {
  std::vector<std::string> out;
  out.reserve(templates_.size());
  for (const auto& [name, tmpl] : templates_) {
    (void)tmpl;
    out.push_back(name);
  }
  return out;
}

}  // namespace ilr

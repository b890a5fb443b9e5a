#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

namespace sra {

/// Entry point of the `sra` tool. Returns the process exit status; errors are
/// reported on `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Files of one command are written to a staging directory inside the output
/// directory. commit() moves them into place; a stage that is never committed
/// is moved under `quarantine/` so partial results never replace earlier ones.
class OutputStage {
public:
  OutputStage(std::filesystem::path out_dir, const std::string& command);
  ~OutputStage();
  OutputStage(const OutputStage&) = delete;
  OutputStage& operator=(const OutputStage&) = delete;

  std::filesystem::path file(const std::string& name) const { return staging_ / name; }
  std::filesystem::path final_path(const std::string& name) const { return out_dir_ / name; }
  void commit();
  // Where the partial files went, if the stage was quarantined.
  const std::filesystem::path& quarantined_to() const { return quarantined_; }
  void abandon();

private:
  std::filesystem::path out_dir_;
  std::filesystem::path staging_;
  std::string command_;
  std::filesystem::path quarantined_;
  bool done_ = false;
};

}  // namespace sra

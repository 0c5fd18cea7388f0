#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace dhz {

// Flat dotted-key configuration with layered precedence: built-in defaults,
// then a config file, then command-line flags. Every key is declared with
// its default up front; reading or writing an undeclared key is an error
// that names the key.
class Config {
public:
    Config(); // registers the toolkit's full key set

    // Lines of "key = value"; '#' starts a comment. Unknown keys throw.
    void load_file(const std::string& path);
    void set(const std::string& key, const std::string& value); // flag layer

    bool has(const std::string& key) const;
    std::string get(const std::string& key) const;
    int get_int(const std::string& key) const;
    double get_double(const std::string& key) const; // accepts "1/255" fractions
    bool get_bool(const std::string& key) const;
    uint64_t get_seed(const std::string& key) const;
    std::vector<double> get_list(const std::string& key) const; // comma-separated
    std::vector<int> get_int_list(const std::string& key) const;

    // Fully resolved "key = value" lines, sorted, for the run's config echo.
    std::string render() const;
    void write(const std::string& path) const;

private:
    void require_known(const std::string& key) const;
    std::map<std::string, std::string> values_;
};

// "1/255" or plain decimal to double.
double parse_fraction(const std::string& text);

} // namespace dhz

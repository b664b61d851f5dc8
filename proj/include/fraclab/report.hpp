#pragma once

#include <string>
#include <utility>
#include <vector>

namespace fraclab {

/// CSV block with a leading `# schema:` comment naming columns and units.
class CsvWriter {
public:
    explicit CsvWriter(std::string schema);
    void add_row(const std::vector<std::string>& cells);
    std::string str() const;
    void write(const std::string& path) const;

private:
    std::string schema_;
    std::vector<std::string> rows_;
};

std::string format_num(double v);

struct SvgSeries {
    std::string label;
    std::vector<std::pair<double, double>> points; // (x, y), plotted on log-log axes
};

/// Minimal hand-written SVG log-log plot, no plotting dependency.
std::string svg_loglog_plot(const std::vector<SvgSeries>& series, const std::string& title);

} // namespace fraclab

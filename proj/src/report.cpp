#include "fraclab/parallel.hpp"
#include "fraclab/report.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <vector>

namespace fraclab {

namespace {
int g_workers = 1;
}

void set_worker_count(int workers) {
    if (workers < 1) throw std::invalid_argument("worker count must be >= 1");
    g_workers = workers;
}

int worker_count() { return g_workers; }

double tiled_sum(std::int64_t count,
                 const std::function<double(std::int64_t, std::int64_t)>& tile_sum,
                 std::int64_t tile) {
    if (count <= 0) return 0.0;
    const std::int64_t ntiles = (count + tile - 1) / tile;
    std::vector<double> partial(static_cast<size_t>(ntiles), 0.0);
    const int nw = static_cast<int>(std::min<std::int64_t>(g_workers, ntiles));
    if (nw <= 1) {
        for (std::int64_t k = 0; k < ntiles; ++k)
            partial[static_cast<size_t>(k)] =
                tile_sum(k * tile, std::min(count, (k + 1) * tile));
    } else {
        std::atomic<std::int64_t> next{0};
        auto work = [&] {
            for (;;) {
                const std::int64_t k = next.fetch_add(1);
                if (k >= ntiles) break;
                partial[static_cast<size_t>(k)] =
                    tile_sum(k * tile, std::min(count, (k + 1) * tile));
            }
        };
        std::vector<std::thread> pool;
        for (int w = 0; w < nw; ++w) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    double acc = 0.0; // ordered reduction: deterministic across worker counts
    for (double v : partial) acc += v;
    return acc;
}

void tiled_for(std::int64_t count,
               const std::function<void(std::int64_t, std::int64_t)>& body,
               std::int64_t tile) {
    if (count <= 0) return;
    const std::int64_t ntiles = (count + tile - 1) / tile;
    const int nw = static_cast<int>(std::min<std::int64_t>(g_workers, ntiles));
    if (nw <= 1) {
        for (std::int64_t k = 0; k < ntiles; ++k)
            body(k * tile, std::min(count, (k + 1) * tile));
        return;
    }
    std::atomic<std::int64_t> next{0};
    auto work = [&] {
        for (;;) {
            const std::int64_t k = next.fetch_add(1);
            if (k >= ntiles) break;
            body(k * tile, std::min(count, (k + 1) * tile));
        }
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < nw; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
}

CsvWriter::CsvWriter(std::string schema) : schema_(std::move(schema)) {
    rows_.reserve(64);
}

void CsvWriter::add_row(const std::vector<std::string>& cells) {
    std::string line;
    for (size_t i = 0; i < cells.size(); ++i) {
        if (i) line += ",";
        line += cells[i];
    }
    rows_.push_back(std::move(line));
}

std::string CsvWriter::str() const {
    std::string out = "# schema: " + schema_ + "\n";
    for (const auto& r : rows_) out += r + "\n";
    return out;
}

void CsvWriter::write(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path);
    os << str();
}

std::string format_num(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

std::string svg_loglog_plot(const std::vector<SvgSeries>& series, const std::string& title) {
    const int W = 640, H = 480, ML = 70, MR = 20, MT = 40, MB = 50;
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& s : series)
        for (const auto& [x, y] : s.points) {
            if (x <= 0 || y <= 0) continue;
            xmin = std::min(xmin, std::log10(x));
            xmax = std::max(xmax, std::log10(x));
            ymin = std::min(ymin, std::log10(y));
            ymax = std::max(ymax, std::log10(y));
        }
    if (xmin > xmax) { xmin = 0; xmax = 1; }
    if (ymin > ymax) { ymin = 0; ymax = 1; }
    if (xmax - xmin < 1e-12) { xmin -= 0.5; xmax += 0.5; }
    if (ymax - ymin < 1e-12) { ymin -= 0.5; ymax += 0.5; }
    auto px = [&](double lx) { return ML + (lx - xmin) / (xmax - xmin) * (W - ML - MR); };
    auto py = [&](double ly) { return H - MB - (ly - ymin) / (ymax - ymin) * (H - MT - MB); };
    const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
    std::ostringstream os;
    os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H << "'>\n";
    os << "<rect width='100%' height='100%' fill='white'/>\n";
    os << "<text x='" << W / 2 << "' y='24' text-anchor='middle' font-size='16'>" << title
       << "</text>\n";
    os << "<line x1='" << ML << "' y1='" << H - MB << "' x2='" << W - MR << "' y2='" << H - MB
       << "' stroke='black'/>\n";
    os << "<line x1='" << ML << "' y1='" << MT << "' x2='" << ML << "' y2='" << H - MB
       << "' stroke='black'/>\n";
    for (size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const char* col = colors[si % 5];
        std::string path;
        for (const auto& [x, y] : s.points) {
            if (x <= 0 || y <= 0) continue;
            const double cx = px(std::log10(x)), cy = py(std::log10(y));
            path += (path.empty() ? "M" : "L") + format_num(cx) + " " + format_num(cy);
            os << "<circle cx='" << cx << "' cy='" << cy << "' r='3' fill='" << col << "'/>\n";
        }
        os << "<path d='" << path << "' fill='none' stroke='" << col << "'/>\n";
        os << "<text x='" << W - MR - 150 << "' y='" << MT + 18 * (si + 1)
           << "' font-size='12' fill='" << col << "'>" << s.label << "</text>\n";
    }
    os << "<text x='" << (ML + W - MR) / 2 << "' y='" << H - 12
       << "' text-anchor='middle' font-size='12'>log10 x</text>\n";
    os << "</svg>\n";
    return os.str();
}

} // namespace fraclab

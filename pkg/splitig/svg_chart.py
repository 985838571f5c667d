"""
SVG path charts.

Two stacked line charts over α: the model output F(α) with a dotted vertical
marker at α*, and the gradient norm ‖∇F‖₂(α). Plain SVG text, no plotting
library.
"""

from xml.sax.saxutils import escape

import numpy as np

from splitig.report import to_json

WIDTH = 640
PANEL_HEIGHT = 240
MARGIN_LEFT = 70
MARGIN_RIGHT = 20
MARGIN_TOP = 30
MARGIN_BOTTOM = 40
LINE_COLOR = '#1f77b4'
GRAD_COLOR = '#d62728'
MARKER_COLOR = '#444444'


def _fmt(value):
    return f"{value:.2f}"


class SVG:
    """Accumulates SVG elements as text."""

    def __init__(self):
        self.svg = ""

    def header(self, width, height):
        self.svg += (
            '<?xml version="1.0" standalone="no"?>\n'
            f'<svg version="1.1" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}" xmlns="http://www.w3.org/2000/svg">\n'
            f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>\n'
        )

    def metadata(self, text):
        self.svg += f"<metadata>{escape(text)}</metadata>\n"

    def group_start(self, attr):
        g_attr = [f'{key}="{value}"' for key, value in attr.items()]
        self.svg += f'<g {" ".join(g_attr)}>\n'

    def group_end(self):
        self.svg += '</g>\n'

    def line(self, x1, y1, x2, y2, stroke, extra=""):
        self.svg += (
            f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" y2="{_fmt(y2)}" '
            f'stroke="{stroke}" {extra}/>\n'
        )

    def polyline(self, xs, ys, stroke, extra=""):
        points = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in zip(xs, ys))
        self.svg += f'<polyline points="{points}" fill="none" stroke="{stroke}" {extra}/>\n'

    def text(self, x, y, string, extra=""):
        self.svg += f'<text x="{_fmt(x)}" y="{_fmt(y)}" font-family="sans-serif" font-size="11" {extra}>{string}</text>\n'

    def get_svg(self):
        return f"{self.svg}</svg>\n"


class Panel:
    """Maps data coordinates into one chart's pixel box."""

    def __init__(self, top, y_values):
        self.left = MARGIN_LEFT
        self.right = WIDTH - MARGIN_RIGHT
        self.top = top + MARGIN_TOP
        self.bottom = top + PANEL_HEIGHT - MARGIN_BOTTOM
        y_values = np.asarray(y_values, dtype=np.float64)
        self.y_min = float(np.min(y_values))
        self.y_max = float(np.max(y_values))
        if self.y_max == self.y_min:
            self.y_min -= 0.5
            self.y_max += 0.5

    def px(self, alpha):
        return self.left + np.asarray(alpha) * (self.right - self.left)

    def py(self, y):
        fraction = (np.asarray(y) - self.y_min) / (self.y_max - self.y_min)
        return self.bottom - fraction * (self.bottom - self.top)

    def draw_axes(self, svg, title, y_label):
        svg.line(self.left, self.bottom, self.right, self.bottom, 'black')
        svg.line(self.left, self.top, self.left, self.bottom, 'black')
        for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
            x = float(self.px(tick))
            svg.line(x, self.bottom, x, self.bottom + 4, 'black')
            svg.text(x - 8, self.bottom + 16, f"{tick:g}")
        svg.text(self.left - 64, float(self.py(self.y_max)) + 4, f"{self.y_max:.3g}")
        svg.text(self.left - 64, float(self.py(self.y_min)) + 4, f"{self.y_min:.3g}")
        svg.text(self.left, self.top - 10, title, 'font-weight="bold"')
        svg.text((self.left + self.right) / 2, self.bottom + 32, "alpha")
        svg.text(self.left - 64, (self.top + self.bottom) / 2, y_label)


def render_path_chart(profile, alpha_star=None, title="", config=None):
    """
    SVG text for a PathProfile.

    Args:
        profile: PathProfile (alphas, outputs, grad_l2_norms)
        alpha_star: Where to draw the dotted marker on the output chart
        title: Prefix for the chart titles
        config: RunConfig embedded as JSON in a <metadata> element
    """
    svg = SVG()
    svg.header(WIDTH, 2 * PANEL_HEIGHT)
    if config is not None:
        svg.metadata(to_json(config.to_dict()))
    prefix = f"{title}: " if title else ""

    output_panel = Panel(0, profile.outputs)
    svg.group_start({'id': 'output'})
    output_panel.draw_axes(svg, f"{prefix}model output F(alpha)", "F")
    svg.polyline(output_panel.px(profile.alphas), output_panel.py(profile.outputs), LINE_COLOR,
                 'stroke-width="1.5"')
    if alpha_star is not None:
        x = float(output_panel.px(alpha_star))
        svg.line(x, output_panel.top, x, output_panel.bottom, MARKER_COLOR,
                 'stroke-dasharray="2,3" class="alpha-star"')
        svg.text(x + 4, output_panel.top + 12, f"alpha* = {alpha_star:.4g}")
    svg.group_end()

    grad_panel = Panel(PANEL_HEIGHT, profile.grad_l2_norms)
    svg.group_start({'id': 'gradient'})
    grad_panel.draw_axes(svg, f"{prefix}gradient L2 norm", "|grad F|")
    svg.polyline(grad_panel.px(profile.alphas), grad_panel.py(profile.grad_l2_norms), GRAD_COLOR,
                 'stroke-width="1.5"')
    svg.group_end()

    return svg.get_svg()

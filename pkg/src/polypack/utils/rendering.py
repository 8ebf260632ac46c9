"""
SVG rendering of packings.

Disks are filled by their number of contacts and, with the Voronoi
overlay, cells by their number of sides. Both use PALETTE, where index k
stands for count k and the last entry for counts of 9 and more:

    0 blue, 1 orange, 2 green, 3 red, 4 purple,
    5 brown, 6 pink, 7 grey, 8 olive, 9+ cyan
"""

import io
import logging
import math

import matplotlib

matplotlib.use('Agg')

import matplotlib.pyplot as plt
import seaborn as sns
from matplotlib.patches import Circle, Polygon

from polypack.config import CONTACT_TOL, MERGE_TOL
from polypack.models.geometry import polygon_vertices
from polypack.utils.metrics import contact_counts
from polypack.utils.topology import classify_cells, clipped_voronoi

# Set up logging
logger = logging.getLogger(__name__)

PALETTE = sns.color_palette('tab10', 10).as_hex()


def palette_color(count):
    """Palette entry for a contact or side count."""
    return PALETTE[min(max(int(count), 0), len(PALETTE) - 1)]


def render_svg(cfg, show_voronoi=False, merge_tol=MERGE_TOL, contact_tol=CONTACT_TOL, path=None):
    """
    Draw a configuration as an SVG document.

    Parameters:
    -----------
    cfg : Configuration
        Packing to draw, in its own convention
    show_voronoi : bool
        Overlay the clipped Voronoi cells, filled by side count
    path : str, optional
        Also write the document to this file

    Returns:
    --------
    str
        The SVG text
    """
    scale = cfg.scale
    outer = 1.0 + cfg.r / math.cos(math.pi / cfg.sigma)
    counts = contact_counts(cfg.points, cfg.sigma, cfg.r, contact_tol)

    plt.rcParams['svg.hashsalt'] = 'polypack'
    fig, ax = plt.subplots(figsize=(6, 6))
    try:
        ax.add_patch(Polygon(polygon_vertices(cfg.sigma, outer) * scale, closed=True,
                             fill=False, edgecolor='black', linewidth=1.2))

        if show_voronoi and cfg.n >= 1:
            diagram = classify_cells(clipped_voronoi(cfg), merge_tol)
            for cell in diagram.cells:
                sides = cell.side_count or len(cell.polygon)
                ax.add_patch(Polygon(cell.polygon * scale, closed=True, facecolor=palette_color(sides),
                                     alpha=0.35, edgecolor='black', linewidth=0.5))

        for (x, y), count in zip(cfg.centers(), counts):
            ax.add_patch(Circle((x, y), cfg.radius, facecolor=palette_color(count),
                                edgecolor='black', linewidth=0.5, alpha=0.9 if not show_voronoi else 0.6))

        limit = outer * scale * 1.05
        ax.set_xlim(-limit, limit)
        ax.set_ylim(-limit, limit)
        ax.set_aspect('equal')
        ax.axis('off')

        buffer = io.StringIO()
        fig.savefig(buffer, format='svg', bbox_inches='tight', metadata={'Date': None})
    finally:
        plt.close(fig)

    svg = buffer.getvalue()
    if path:
        with open(path, 'w', encoding='utf-8') as f:
            f.write(svg)
        logger.info(f"Wrote {path}")
    return svg

"""
Defines the `Image` object and the state-strip renderer, which draws a
two-band color-coded timeline of predicted states above true states.
"""

from typing import Union as _Union
import io as _io
import re as _re
import pathlib as _pathlib
import numpy as _np
from . import _color
from .series import derive_change_points as _derive_change_points, _states_of

try:
    import cairocffi as _cairo
except (ImportError, OSError) as _error:
    _cairo = None
    _CAIRO_ERROR = _error

try:
    from ._version import __version__
except ImportError:
    __version__ = "???"


_FONT_FACE = "Arial"
_FONT_SIZE = 8
_STRIP_STYLE = {
    "sample_width": 1.0,
    "band_height": 20.0,
    "gap": 2.0,
    "margin": 4.0,
    "label_width": 60.0,
}


def set_default_font(font_face: str = None, font_size: _Union[int, float] = None):
    """
    Set the default font face and/or size used for band labels and
    annotations. If no font is set, statekit defaults to 8pt Arial.
    """
    global _FONT_FACE, _FONT_SIZE
    if font_face is not None:
        _FONT_FACE = str(font_face)
    if font_size is not None:
        _FONT_SIZE = float(font_size)


def set_default_strip_style(
    *,
    sample_width: float = None,
    band_height: float = None,
    gap: float = None,
    margin: float = None,
    label_width: float = None,
):
    """
    Set the default geometry of state strips, in pixels: the width of one
    sample, the height of each band, the gap between the two bands, the
    outer margin, and the space reserved on the left for the band labels.
    """
    for key, value in (
        ("sample_width", sample_width),
        ("band_height", band_height),
        ("gap", gap),
        ("margin", margin),
        ("label_width", label_width),
    ):
        if value is None:
            continue
        value = float(value)
        if value < 0 or (key in ("sample_width", "band_height") and value == 0):
            raise ValueError(f"Invalid strip {key}: {value}")
        _STRIP_STYLE[key] = value


class Image:
    """
    The Image class is a drawing canvas measured in pixels. Drawing methods
    add components to a stack that is only rendered when the image is saved,
    so an image can be written to several formats:

    ```python
    img = statekit.vis.Image(600, 50)
    img.draw_rectangle((0, 0, 100, 20), fill_color="#4e79a7")
    img.save('strip.svg')
    ```
    """

    def __init__(self, width: int, height: int):
        """
        Initialized with:

        - `width` Width of the canvas in pixels.
        - `height` Height of the canvas in pixels.
        """
        width, height = int(width), int(height)
        if width < 1 or height < 1:
            raise ValueError(f"Image dimensions must be positive, got {width}x{height}.")
        self.width = width
        self.height = height
        self._background_color = (1, 1, 1)
        self._components = []

    def __repr__(self):
        return f"Image[{self.width}x{self.height}, {len(self._components)} components]"

    ################
    # PUBLIC METHODS
    ################

    def set_background_color(self, color: _Union[str, tuple]):
        """
        Set the background color of the image. By default the background color
        is white. If `color` is set to `None`, the background will be
        transparent.
        """
        self._background_color = _color_to_rgb(color, default=None)

    def draw_rectangle(
        self,
        rect,
        *,
        color: _Union[str, tuple] = None,
        stroke_width: _Union[int, float] = 1,
        fill_color: _Union[str, tuple] = None,
        opacity: float = 1.0,
    ):
        """
        Draw a rectangle given as a tuple of the form (x, y, width, height).
        If no `color` or `fill_color` is provided, `color` will default to
        black.
        """
        if color is None and fill_color is None:
            color = "black"
        try:
            assert len(rect) == 4
            x, y, width, height = rect
        except Exception as e:
            e.args = ("rect should be a tuple of the form (x, y, width, height).",)
            raise
        self._add_component(
            _draw_rectangle,
            {
                "x": float(x),
                "y": float(y),
                "width": float(width),
                "height": float(height),
                "color": _color_to_rgb(color, default=None),
                "stroke_width": float(stroke_width),
                "fill_color": _color_to_rgb(fill_color, default=None),
                "opacity": float(opacity),
            },
        )

    def draw_annotation(
        self,
        xy: tuple,
        text: str,
        *,
        font_face: str = None,
        font_size: _Union[int, float] = None,
        color: _Union[str, tuple] = "black",
        anchor: str = "left",
    ):
        """
        Draw text with its baseline at `xy`. `anchor` may be `left`, `center`,
        or `right`.
        """
        if anchor not in ("left", "center", "right"):
            raise ValueError(f"Unknown anchor {anchor!r}.")
        self._add_component(
            _draw_text,
            {
                "x": float(xy[0]),
                "y": float(xy[1]),
                "text": str(text),
                "font_face": _FONT_FACE if font_face is None else str(font_face),
                "font_size": _FONT_SIZE if font_size is None else float(font_size),
                "color": _color_to_rgb(color, default=(0, 0, 0)),
                "anchor": anchor,
            },
        )

    def save(self, output_path, *, width: int = 150):
        """
        Save the image to some `output_path`. Images can be saved as .pdf,
        .svg, or .png. `width` only applies to the vector formats and
        determines the millimeter width of the output file; PNG images are
        saved at pixel size.
        """
        output_path = _pathlib.Path(output_path)
        if not output_path.parent.exists():
            raise ValueError(f"Path does not exist: {output_path.parent}")
        image_format = output_path.suffix[1:].upper()
        if image_format not in ["PDF", "SVG", "PNG"]:
            raise ValueError(
                "Unrecognized format. Use .pdf or .svg for vector output, or .png for raster output."
            )
        if image_format == "SVG":
            with open(output_path, "w", encoding="utf-8") as file:
                file.write(self.render_svg(width=width))
            return
        _require_cairo()
        if image_format == "PNG":
            surface = _cairo.ImageSurface(_cairo.FORMAT_ARGB32, self.width, self.height)
            scale = 1
        else:
            surface, scale = self._make_vector_surface(str(output_path), "PDF", width)
        self._render(surface, scale)
        if image_format == "PNG":
            surface.write_to_png(str(output_path))
        surface.finish()

    def render_svg(self, *, width: int = 150) -> str:
        """
        Render the image to an SVG document and return it as a string. The
        output is deterministic: cairo's random surface id is removed.
        """
        _require_cairo()
        buffer = _io.BytesIO()
        surface, scale = self._make_vector_surface(buffer, "SVG", width)
        self._render(surface, scale)
        surface.finish()
        return _strip_cairo_surface_id(buffer.getvalue().decode("utf-8"))

    #################
    # PRIVATE METHODS
    #################

    def _add_component(self, func, arguments):
        """
        Add a component to the stack. This should be a draw_ function and its
        arguments. This function will be called with its arguments at save
        time.
        """
        self._components.append((func, arguments))

    def _make_vector_surface(self, target, image_format, width):
        """
        Make a vector surface in which one canvas pixel is scaled to a number
        of points such that the image is `width` millimeters wide.
        """
        image_width = _mm_to_pts(width)
        scale = image_width / self.width
        image_height = self.height * scale
        if image_format == "PDF":
            surface = _cairo.PDFSurface(target, image_width, image_height)
            surface.set_metadata(_cairo.PDF_METADATA_CREATOR, f"statekit {__version__}")
        else:
            surface = _cairo.SVGSurface(target, image_width, image_height)
        surface.set_device_scale(scale, scale)
        return surface, scale

    def _render(self, surface, scale):
        context = _cairo.Context(surface)
        if self._background_color is not None:
            with context:
                context.set_source_rgb(*self._background_color)
                context.paint()
        for func, arguments in self._components:
            with context:
                func(context, scale, **arguments)


################
# STATE STRIPS
################


def state_runs(labels, mask=None, max_samples: int = None) -> list:
    """
    Split a label sequence into maximal runs of one state. Returns a list of
    `(start, stop, state)` tuples covering the unmasked prefix of the
    sequence, truncated to `max_samples`. Run boundaries are exactly the
    change points returned by `statekit.series.derive_change_points()`.
    """
    states = _states_of(labels)
    length = states.shape[0]
    if mask is not None:
        mask = _np.asarray(mask).astype(bool)
        if mask.shape != states.shape:
            raise ValueError(
                f"mask has length {mask.shape[0]} but labels have length {length}."
            )
        length = int(mask.sum())
    if max_samples is not None:
        length = min(length, int(max_samples))
    if length == 0:
        return []
    states = states[:length]
    starts = [0] + [t for t, _ in _derive_change_points(states)]
    stops = starts[1:] + [length]
    return [(start, stop, int(states[start])) for start, stop in zip(starts, stops)]


def state_strip_rectangles(
    labels, *, y: float = 0.0, x: float = 0.0, mask=None, max_samples: int = 600
) -> list:
    """
    Lay out one band of a state strip: returns `(x, y, width, height, state)`
    for each run of `labels`, using the current strip style.
    """
    sample_width = _STRIP_STYLE["sample_width"]
    band_height = _STRIP_STYLE["band_height"]
    return [
        (
            x + start * sample_width,
            y,
            (stop - start) * sample_width,
            band_height,
            state,
        )
        for start, stop, state in state_runs(labels, mask, max_samples)
    ]


def render_state_strip(
    true_labels,
    pred_labels,
    mask=None,
    max_samples: int = 600,
    *,
    output_path=None,
    labels: bool = True,
) -> str:
    """
    Draw the predicted states (top band) above the true states (bottom band)
    with one stable color per state id. Only the first `max_samples` unmasked
    timesteps are drawn. Returns the SVG document as a string and, if
    `output_path` is given, also saves the image there (.svg, .pdf or .png).
    """
    true_states = _states_of(true_labels)
    pred_states = _states_of(pred_labels)
    if true_states.shape != pred_states.shape:
        raise ValueError(
            f"True labels have length {true_states.shape[0]} but predictions have length {pred_states.shape[0]}."
        )
    style = _STRIP_STYLE
    left = style["margin"] + (style["label_width"] if labels else 0.0)
    top = style["margin"]
    pred_rects = state_strip_rectangles(
        pred_states, x=left, y=top, mask=mask, max_samples=max_samples
    )
    true_rects = state_strip_rectangles(
        true_states,
        x=left,
        y=top + style["band_height"] + style["gap"],
        mask=mask,
        max_samples=max_samples,
    )
    drawn = sum(w for _, _, w, _, _ in true_rects)
    width = _np.ceil(left + max(drawn, style["sample_width"]) + style["margin"])
    height = _np.ceil(2 * style["band_height"] + style["gap"] + 2 * style["margin"])
    img = Image(width, height)
    for x, y, w, h, state in pred_rects + true_rects:
        img.draw_rectangle((x, y, w, h), fill_color=_color.state_color(state))
    if labels:
        for name, y in (("prediction", top), ("truth", top + style["band_height"] + style["gap"])):
            img.draw_annotation(
                (left - style["margin"], y + style["band_height"] * 0.65),
                name,
                anchor="right",
            )
    svg = img.render_svg()
    if output_path is not None:
        output_path = _pathlib.Path(output_path)
        if output_path.suffix.lower() != ".svg":
            img.save(output_path)
        elif not output_path.parent.exists():
            raise ValueError(f"Path does not exist: {output_path.parent}")
        else:
            output_path.write_text(svg, encoding="utf-8")
    return svg


################
# DRAW FUNCTIONS
################


def _draw_rectangle(
    context,
    scale,
    x,
    y,
    width,
    height,
    color,
    stroke_width,
    fill_color,
    opacity,
):
    context.rectangle(x, y, width, height)
    if fill_color:
        context.set_source_rgba(*fill_color, opacity)
        if color and stroke_width:
            context.fill_preserve()
        else:
            context.fill()
    if color and stroke_width:
        context.set_source_rgb(*color)
        context.set_line_width(stroke_width / scale)
        context.stroke()


def _draw_text(context, scale, x, y, text, font_face, font_size, color, anchor):
    context.set_source_rgb(*color)
    context.select_font_face(font_face)
    context.set_font_size(font_size)
    text_width = context.text_extents(text)[4]
    if anchor == "center":
        x -= text_width / 2
    elif anchor == "right":
        x -= text_width
    context.move_to(x, y)
    context.show_text(text)


##################
# HELPER FUNCTIONS
##################


def _require_cairo():
    if _cairo is None:
        raise RuntimeError(f"Rendering requires the cairo library: {_CAIRO_ERROR}")


def _mm_to_pts(mm):
    """
    Convert millimeters to points.
    """
    return mm / (25.4 / 72)


def _color_to_rgb(color, default=(0, 0, 0)):
    """
    Convert a color to RGB values in [0, 1]. Can take an RGB tuple in [0,
    255], a hex triplet, or a named color. If the color cannot be interpreted,
    the passed-in default is returned.
    """
    if color is not None:
        if isinstance(color, str):
            color = color.lower()
            if color in _color.colors:
                r, g, b = _color.colors[color]
                return r / 255, g / 255, b / 255
            if color.startswith("#") and len(color) == 7:
                r, g, b = tuple(bytes.fromhex(color[1:]))
                return r / 255, g / 255, b / 255
        try:
            if len(color) == 3:
                return color[0] / 255, color[1] / 255, color[2] / 255
        except Exception:
            pass
    return default


def _strip_cairo_surface_id(svg):
    """
    Cairo's SVG output includes a random ID number in the global <g> tag.
    Remove this ID to produce deterministic SVG output.
    """
    return _re.sub(r'<g id="surface.+?">', "<g>", svg)

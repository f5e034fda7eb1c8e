"""Exception hierarchy shared by every toolinertia module."""


class ToolInertiaError(Exception):
    """Base class for all errors raised by this package."""


class ArgumentError(ToolInertiaError, ValueError):
    pass


class ParseError(ToolInertiaError):
    """Malformed JSON input. ``offset`` is the byte offset of the failure."""

    def __init__(self, message: str, offset: int = 0):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class SchemaError(ToolInertiaError):
    pass


class ConflictError(ToolInertiaError):
    pass


class UnknownToolError(ToolInertiaError, KeyError):
    def __init__(self, tool: str, step=None):
        self.tool = tool
        self.step = step
        where = f" at step {step}" if step is not None else ""
        super().__init__(f"unknown tool {tool!r}{where}")

    def __str__(self):
        return self.args[0]


class NotFoundError(ToolInertiaError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "not found"


class AdapterError(ToolInertiaError):
    pass

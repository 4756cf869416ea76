"""Cut-and-paste synthesis of annotated training images with blending-gap inpainting."""

__version__ = "0.1.0"

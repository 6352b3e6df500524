"""
Utilidades para manejo de archivos.

Proporciona funciones para:
- Lectura y escritura de archivos de resultados
- Gestión de directorios de salida
- Hashes para verificar determinismo de las salidas
"""

import hashlib
import json
from pathlib import Path
from typing import Any, Dict, Union

from app.core.exceptions import FileReadError, FileWriteError


class FileUtils:
    """Operaciones de archivo comunes del sistema."""

    @classmethod
    def compute_file_hash(
        cls,
        filepath: Union[str, Path],
        algorithm: str = "sha256"
    ) -> str:
        """
        Calcula el hash de un archivo leyendo por bloques.

        Args:
            filepath: Ruta al archivo
            algorithm: Algoritmo de hash (sha256, md5...)

        Returns:
            str: Hash del archivo en hexadecimal
        """
        path = Path(filepath)
        hash_obj = hashlib.new(algorithm)

        try:
            with open(path, 'rb') as f:
                for chunk in iter(lambda: f.read(8192), b''):
                    hash_obj.update(chunk)
        except OSError as e:
            raise FileReadError(filepath=str(path), reason=str(e))

        return hash_obj.hexdigest()

    @classmethod
    def hash_mapping(cls, data: Dict[str, Any]) -> str:
        """Hash estable de un diccionario (claves ordenadas)."""
        payload = json.dumps(data, sort_keys=True, default=str).encode("utf-8")
        return hashlib.sha256(payload).hexdigest()

    @classmethod
    def ensure_directory(cls, directory: Union[str, Path]) -> Path:
        """
        Asegura que un directorio existe, creándolo si es necesario.

        Args:
            directory: Ruta del directorio

        Returns:
            Path: Objeto Path del directorio
        """
        path = Path(directory)
        path.mkdir(parents=True, exist_ok=True)
        return path

    @classmethod
    def ensure_parent(cls, filepath: Union[str, Path]) -> Path:
        """Crea el directorio padre de ``filepath`` y devuelve la ruta."""
        path = Path(filepath)
        if path.parent != Path(""):
            cls.ensure_directory(path.parent)
        return path

    @classmethod
    def write_text_file(
        cls,
        filepath: Union[str, Path],
        content: str,
        encoding: str = "utf-8"
    ) -> Path:
        """
        Escribe texto con finales de línea LF.

        Raises:
            FileWriteError: Si no se puede escribir
        """
        path = cls.ensure_parent(filepath)
        try:
            with open(path, "w", encoding=encoding, newline="\n") as f:
                f.write(content)
        except OSError as e:
            raise FileWriteError(filepath=str(path), reason=str(e))
        return path

    @classmethod
    def read_text_file(
        cls,
        filepath: Union[str, Path],
        encoding: str = "utf-8"
    ) -> str:
        """
        Lee un archivo de texto.

        Raises:
            FileReadError: Si no se puede leer
        """
        path = Path(filepath)
        try:
            return path.read_text(encoding=encoding)
        except OSError as e:
            raise FileReadError(filepath=str(path), reason=str(e))

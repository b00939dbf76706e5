#!/usr/bin/env python3
"""
Servicio de autoridad de atributos (DKPABE)
Emite claves de forma ciega: cada POST /issue lleva una WireFrame y responde con otra
Desplegado en Render.com
"""

import os
import threading
import time
from datetime import datetime
from flask import Flask, Response, request, jsonify
import logging

# Configurar logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

from dkpabe.config import ServiceConfig
from dkpabe.encoding import Role, encode, load_entity
from dkpabe.errors import DkpabeError, FormatError, ProtocolAbort, SessionExpired
from dkpabe.issuing import AuthorityIssuingSession, GrantTable
from dkpabe.wire import (FrameType, decode_frame, decode_issue_complete, decode_issue_request,
                         encode_blind_sum_reply, encode_blinded_keys, error_frame)

FRAME_MIMETYPE = 'application/octet-stream'


class SessionStore:
    """Sesiones de emision abiertas, indexadas por id de sesion"""

    def __init__(self, ttl):
        self.ttl = ttl
        self._lock = threading.Lock()
        self._sessions = {}

    def __len__(self):
        with self._lock:
            return len(self._sessions)

    def put(self, session_id, session):
        with self._lock:
            if session_id in self._sessions:
                raise ProtocolAbort("La sesion ya existe")
            self._sessions[session_id] = session

    def take(self, session_id):
        """Saca la sesion del almacen; un mismo id nunca se procesa en paralelo"""
        with self._lock:
            session = self._sessions.pop(session_id, None)
        if session is None:
            raise SessionExpired(f"Sesion desconocida {session_id.hex()}")
        if session.expired(self.ttl):
            session.abort()
            raise SessionExpired(f"Sesion caducada {session_id.hex()}")
        return session

    def purge(self, now=None):
        """Aborta y elimina las sesiones caducadas"""
        with self._lock:
            expired = [key for key, session in self._sessions.items() if session.expired(self.ttl, now)]
            sessions = [self._sessions.pop(key) for key in expired]
        for session in sessions:
            session.abort()
        return len(sessions)


class AuthorityState:
    """Material de clave cargado una vez (solo lectura) y la tabla de permisos"""

    def __init__(self, params, pk, sk, grants, grants_path=None, ttl=300.0, max_frame=1 << 20, rng=None):
        self.params = params
        self.pk = pk
        self._sk = sk
        self._grants = grants
        self.grants_path = grants_path
        self._grants_mtime = self._mtime()
        self._grants_lock = threading.Lock()
        self.sessions = SessionStore(ttl)
        self.max_frame = max_frame
        self.rng = rng

    @staticmethod
    def from_config(config):
        params = load_entity(config.params_path, Role.GLOBAL_PARAMS)
        pk = load_entity(config.public_key_path, Role.AUTHORITY_PK, params)
        sk = load_entity(config.secret_key_path, Role.AUTHORITY_SK, params)
        grants = GrantTable.load(config.grants_path)
        logger.info(f"Autoridad {pk.label} cargada: {pk.n_attributes} atributos, {len(grants)} permisos")
        return AuthorityState(params, pk, sk, grants, config.grants_path, config.session_ttl, config.max_frame)

    def _mtime(self):
        if not self.grants_path or not os.path.exists(self.grants_path):
            return None
        return os.path.getmtime(self.grants_path)

    @property
    def grants(self):
        """Relee la tabla si el fichero ha cambiado (el comando grant la amplia en caliente)"""
        if self.grants_path:
            with self._grants_lock:
                mtime = self._mtime()
                if mtime != self._grants_mtime:
                    self._grants = GrantTable.load(self.grants_path)
                    self._grants_mtime = mtime
                    logger.info(f"Tabla de permisos recargada: {len(self._grants)} filas")
        return self._grants

    def new_session(self):
        return AuthorityIssuingSession(self.params, self.pk, self._sk, self.grants, self.rng)


def _rejected_frame(data, error):
    """Violacion de trama: se cierra la conexion sin tocar ninguna sesion"""
    logger.warning(f"Trama rechazada ({len(data)} bytes): {type(error).__name__}: {error}")
    response = jsonify({'error': f'Trama invalida: {error}'})
    response.headers['Connection'] = 'close'
    return response, 400


def create_app(config=None, state=None):
    """Crea la aplicacion Flask de una autoridad"""
    app = Flask(__name__)
    if state is None:
        state = AuthorityState.from_config(config or ServiceConfig.load())
    app.config['AUTHORITY'] = state

    @app.route('/', methods=['GET'])
    def health_check():
        """Endpoint de verificación de salud"""
        return jsonify({
            'status': 'ok',
            'message': 'Servicio de autoridad DKPABE funcionando',
            'timestamp': datetime.now().isoformat(),
            'authority_id': state.pk.authority_id,
            'authority': state.pk.label,
            'backend': state.params.backend.value,
            'open_sessions': len(state.sessions),
        })

    @app.route('/params', methods=['GET'])
    def global_params():
        """Parametros globales en formato de almacen de claves"""
        return Response(encode(state.params, state.params), mimetype=FRAME_MIMETYPE)

    @app.route('/public-key', methods=['GET'])
    def public_key():
        """Clave publica de esta autoridad"""
        return Response(encode(state.params, state.pk), mimetype=FRAME_MIMETYPE)

    @app.route('/issue', methods=['POST'])
    def issue():
        """Procesar una trama del protocolo de emision ciega"""
        state.sessions.purge()
        data = request.get_data(cache=False)
        try:
            frame = decode_frame(data, state.max_frame)
            if frame.type == FrameType.ISSUE_REQUEST:
                message = decode_issue_request(state.params, frame)
            elif frame.type == FrameType.ISSUE_COMPLETE:
                message = decode_issue_complete(state.params, frame)
            else:
                raise FormatError(f"Tipo de trama inesperado: {frame.type.name}")
        except DkpabeError as e:
            if isinstance(e, FormatError):
                return _rejected_frame(data, e)
            message = e
        except Exception as e:
            # Errores del decodificador fuera de la jerarquia (puntos o arboles mal formados)
            return _rejected_frame(data, e)

        session = None
        try:
            if isinstance(message, DkpabeError):
                raise message
            if frame.type == FrameType.ISSUE_REQUEST:
                session = state.new_session()
                reply = encode_blind_sum_reply(session.handle_request(message))
                state.sessions.put(frame.session_id, session)
            else:
                session = state.sessions.take(frame.session_id)
                keys = session.handle_complete(message)
                reply = encode_blinded_keys(state.params, state.pk, (message.P, message.Q, message.R), keys)
            logger.info(f"session={frame.session_id.hex()} frame={frame.type.name} outcome=ok")
            return Response(reply.to_bytes(), mimetype=FRAME_MIMETYPE)

        except DkpabeError as e:
            if session is not None:
                session.abort()
            logger.warning(f"session={frame.session_id.hex()} frame={frame.type.name} outcome=abort "
                           f"error={type(e).__name__}")
            response = Response(error_frame(frame.session_id, e).to_bytes(), mimetype=FRAME_MIMETYPE)
            response.headers['Connection'] = 'close'
            return response

        except Exception as e:
            if session is not None:
                session.abort()
            logger.error(f"Error en issue: {str(e)}")
            return jsonify({'error': f'Error interno: {str(e)}'}), 500

    return app


if __name__ == '__main__':
    config = ServiceConfig.load()
    host, port = config.address
    port = int(os.environ.get('PORT', port))
    logger.info(f"Iniciando servidor Flask en {host}:{port}")
    try:
        create_app(config).run(host=host, port=port, debug=False, threaded=True)
    except Exception as e:
        logger.error(f"Error iniciando servidor: {e}")
        raise
